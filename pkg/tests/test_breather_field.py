import numpy as np
import pytest
import scipy.integrate
from hypothesis import given, settings
from hypothesis import strategies as st

from breather_lab.breather_field import (
    EquidistributedCenters,
    MeasureSpec,
    OmegaSample,
    evaluate_potential,
    increment_centers,
    lattice_sites,
    omega_from_json,
    omega_to_json,
    potential_on_grid,
    sample_omega,
    shift_all,
    shift_one,
    w_indicator,
)
from breather_lab.grid_operator import GridSpec

from conftest import UNIFORM

LINEAR = MeasureSpec(0.1, 0.4, density="truncated_linear", slope=2.0)


def const_omega(value, L=3, d=1):
    return OmegaSample(L=L, d=d, radii=np.full(L**d, float(value)))


class TestMeasureSpec:
    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(omega_minus=-0.1, omega_plus=0.3),
            dict(omega_minus=0.3, omega_plus=0.3),
            dict(omega_minus=0.1, omega_plus=0.5),
            dict(omega_minus=0.1, omega_plus=0.3, density="gaussian"),
            dict(omega_minus=0.1, omega_plus=0.3, slope=1.0),
            dict(omega_minus=0.1, omega_plus=0.4, density="truncated_linear",
                 slope=-4.0),
        ],
    )
    def test_validation(self, kwargs):
        with pytest.raises(ValueError):
            MeasureSpec(**kwargs)

    @pytest.mark.parametrize("measure", [UNIFORM, LINEAR,
                                         MeasureSpec(0.0, 0.45),
                                         MeasureSpec(0.1, 0.4,
                                                     density="truncated_linear",
                                                     slope=-2.0)])
    def test_pdf_normalized(self, measure):
        val, _ = scipy.integrate.quad(measure.pdf, measure.omega_minus,
                                      measure.omega_plus)
        assert val == pytest.approx(1.0, abs=1e-12)
        assert measure.pdf(measure.omega_minus - 0.01) == 0.0
        assert measure.pdf(measure.omega_plus + 0.01) == 0.0

    def test_density_sup(self):
        assert UNIFORM.density_sup == pytest.approx(1.0 / 0.3)
        grid = np.linspace(0.1, 0.4, 10001)
        assert LINEAR.density_sup == pytest.approx(LINEAR.pdf(grid).max(),
                                                   rel=1e-3)
        falling = MeasureSpec(0.1, 0.4, density="truncated_linear", slope=-2.0)
        assert falling.density_sup == pytest.approx(falling.pdf(grid).max(),
                                                    rel=1e-3)

    @pytest.mark.parametrize("measure", [UNIFORM, LINEAR])
    def test_mean_matches_quadrature(self, measure):
        val, _ = scipy.integrate.quad(lambda x: x * measure.pdf(x),
                                      measure.omega_minus, measure.omega_plus)
        assert measure.mean() == pytest.approx(val, abs=1e-12)

    @pytest.mark.parametrize("measure", [UNIFORM, LINEAR])
    def test_inv_cdf(self, measure):
        u = np.linspace(0.0, 1.0, 201)
        x = measure.inv_cdf(u)
        assert np.all(np.diff(x) > 0)
        assert x[0] == pytest.approx(measure.omega_minus, abs=1e-12)
        assert x[-1] == pytest.approx(measure.omega_plus, abs=1e-12)
        # composing with the CDF gives back the uniform variate
        for ui, xi in zip(u[1:-1:20], x[1:-1:20]):
            cdf, _ = scipy.integrate.quad(measure.pdf, measure.omega_minus, xi)
            assert cdf == pytest.approx(ui, abs=1e-10)


class TestSampling:
    def test_degenerate_width(self):
        tight = MeasureSpec(0.2, 0.2 + 1e-15)
        omega = sample_omega(tight, 3, seed=123)
        assert np.abs(omega.radii - 0.2).max() <= 1e-15

    def test_range_and_determinism(self):
        a = sample_omega(UNIFORM, 5, seed=42)
        b = sample_omega(UNIFORM, 5, seed=42)
        assert a.radii.shape == (5,)
        assert np.all((a.radii >= 0.1) & (a.radii <= 0.4))
        assert np.array_equal(a.radii, b.radii)
        c = sample_omega(UNIFORM, 5, seed=43)
        assert not np.array_equal(a.radii, c.radii)

    def test_restriction_consistency(self):
        # values are keyed per site, so a smaller box is a restriction of a
        # larger one under the same seed
        small = sample_omega(UNIFORM, 3, seed=7, d=2)
        large = sample_omega(UNIFORM, 5, seed=7, d=2)
        for site in small.sites:
            assert small.value(site) == large.value(site)

    def test_even_box_rejected(self):
        with pytest.raises(ValueError):
            sample_omega(UNIFORM, 4, seed=0)

    def test_marginal_mean(self):
        omega = sample_omega(UNIFORM, 99999, seed=2024)
        values = omega.radii
        stderr = values.std(ddof=1) / np.sqrt(values.size)
        assert abs(values.mean() - UNIFORM.mean()) <= 4.0 * stderr

    def test_marginal_mean_linear(self):
        omega = sample_omega(LINEAR, 9999, seed=11)
        values = omega.radii
        stderr = values.std(ddof=1) / np.sqrt(values.size)
        assert abs(values.mean() - LINEAR.mean()) <= 4.0 * stderr


class TestOmegaSample:
    def test_shape_validation(self):
        with pytest.raises(ValueError):
            OmegaSample(L=3, d=1, radii=np.array([0.1, 0.2]))
        with pytest.raises(ValueError):
            OmegaSample(L=3, d=1, radii=np.array([0.1, 0.2, 0.6]))
        with pytest.raises(ValueError):
            OmegaSample(L=3, d=1, radii=np.array([-0.1, 0.2, 0.3]))

    def test_site_enumeration(self):
        assert lattice_sites(3, 2) == [(-1, -1), (-1, 0), (-1, 1), (0, -1),
                                       (0, 0), (0, 1), (1, -1), (1, 0), (1, 1)]
        omega = OmegaSample(L=3, d=1, radii=np.array([0.1, 0.2, 0.3]))
        assert omega.value(-1) == 0.1
        assert omega.value((0,)) == 0.2
        assert omega.max_radius() == 0.3


class TestEvaluatePotential:
    def test_ball_inside(self):
        omega = const_omega(0.3, L=1)
        assert evaluate_potential(omega, "ball", 0.2) == 1

    def test_ball_outside(self):
        omega = const_omega(0.3, L=1)
        assert evaluate_potential(omega, "ball", 0.35) == 0

    def test_open_boundary(self):
        omega = const_omega(0.3, L=1)
        assert evaluate_potential(omega, "ball", 0.3) == 0
        assert evaluate_potential(omega, "cube", 0.3) == 0

    def test_cube_corner(self):
        omega = const_omega(0.3, L=1, d=2)
        assert evaluate_potential(omega, "cube", (0.29, -0.29)) == 1
        assert evaluate_potential(omega, "ball", (0.29, -0.29)) == 0

    def test_outside_box_rejected(self):
        omega = const_omega(0.3, L=1)
        with pytest.raises(ValueError):
            evaluate_potential(omega, "ball", 0.51)
        with pytest.raises(ValueError):
            evaluate_potential(omega, "goat", 0.2)

    def test_disjoint_supports(self):
        omega = sample_omega(UNIFORM, 5, seed=19)
        for x in np.linspace(-2.49, 2.49, 401):
            assert evaluate_potential(omega, "ball", x) in (0, 1)


class TestPotentialOnGrid:
    @pytest.mark.parametrize("shape,d,n_h", [("ball", 1, 8), ("cube", 1, 8),
                                             ("ball", 2, 4), ("cube", 2, 4)])
    def test_matches_pointwise(self, shape, d, n_h):
        grid = GridSpec(d=d, L=3, n_h=n_h)
        omega = sample_omega(UNIFORM, 3, seed=13, d=d)
        v = potential_on_grid(omega, shape, grid)
        for k, x in enumerate(grid.points()):
            assert v[k] == evaluate_potential(omega, shape, x)

    def test_strict_boundary_on_grid(self):
        # radius 0.25 with spacing 0.25: the points at exactly +-0.25 are on
        # the open ball's boundary and must stay outside
        grid = GridSpec(d=1, L=1, n_h=4)
        omega = const_omega(0.25, L=1)
        assert np.array_equal(potential_on_grid(omega, "ball", grid),
                              [0.0, 1.0, 0.0])

    def test_box_mismatch(self):
        grid = GridSpec(d=1, L=5, n_h=4)
        with pytest.raises(ValueError):
            potential_on_grid(const_omega(0.2, L=3), "ball", grid)
        with pytest.raises(ValueError):
            potential_on_grid(const_omega(0.2, L=5, d=2), "ball", grid)


class TestShifts:
    def test_shift_all(self):
        shifted = shift_all(const_omega(0.2), 0.1)
        assert shifted.radii == pytest.approx([0.3, 0.3, 0.3])

    def test_shift_zero_identity(self):
        omega = sample_omega(UNIFORM, 3, seed=5)
        assert np.array_equal(shift_all(omega, 0.0).radii, omega.radii)

    def test_shift_overshoot(self):
        with pytest.raises(ValueError):
            shift_all(const_omega(0.45), 0.1)
        with pytest.raises(ValueError):
            shift_all(const_omega(0.2), -0.05)

    def test_shift_clips_to_half_exactly(self):
        # 0.4 + 0.1 overshoots 0.5 by one ulp in floats; the result must be
        # exactly 1/2, which OmegaSample admits
        shifted = shift_all(const_omega(0.4), 0.1)
        assert np.all(shifted.radii == 0.5)

    def test_shift_one(self):
        shifted = shift_one(const_omega(0.2), 0, 0.05)
        assert shifted.radii == pytest.approx([0.2, 0.25, 0.2])
        assert np.array_equal(shift_one(const_omega(0.2), (1,), 0.0).radii,
                              const_omega(0.2).radii)

    def test_shift_one_bad_site(self):
        with pytest.raises(ValueError):
            shift_one(const_omega(0.2), 5, 0.05)
        with pytest.raises(ValueError):
            shift_one(const_omega(0.2), 0, -0.1)


class TestIncrementCenters:
    def test_annulus_midline(self):
        centers = increment_centers(const_omega(0.2, L=1), 0.1)
        assert centers.delta == pytest.approx(0.05)
        assert centers.centers == pytest.approx(np.array([[0.25]]))

    def test_boundary_shift_allowed(self):
        centers = increment_centers(const_omega(0.4, L=1), 0.1)
        assert centers.centers == pytest.approx(np.array([[0.45]]))

    def test_overshoot_rejected(self):
        with pytest.raises(ValueError):
            increment_centers(const_omega(0.45, L=1), 0.2)
        with pytest.raises(ValueError):
            increment_centers(const_omega(0.2, L=1), 0.0)

    def test_ball_inside_annulus_d2(self):
        # brute-force scan: every point of B_{0.05}(x_0) lies in the open
        # annulus 0.3 < |y| < 0.4 around the site
        omega = const_omega(0.3, L=1, d=2)
        centers = increment_centers(omega, 0.1)
        x0 = centers.centers[0]
        assert np.linalg.norm(x0) == pytest.approx(0.35)
        # polar scan kept a hair inside the open ball so float rounding at
        # the boundary cannot fake a violation
        r = np.linspace(0.0, 0.0495, 100)
        phi = np.linspace(0.0, 2.0 * np.pi, 360, endpoint=False)
        rr, pp = np.meshgrid(r, phi)
        pts = np.stack([x0[0] + (rr * np.cos(pp)).ravel(),
                        x0[1] + (rr * np.sin(pp)).ravel()], axis=-1)
        norms = np.linalg.norm(pts, axis=1)
        assert np.all((norms > 0.3) & (norms < 0.4))

    def test_validation(self):
        with pytest.raises(ValueError):
            EquidistributedCenters(L=1, d=1, delta=0.6, centers=[[0.0]])
        with pytest.raises(ValueError):
            # reach 0.3 + 0.3 = 0.6 leaves the unit cell
            EquidistributedCenters(L=1, d=1, delta=0.3, centers=[[0.3]])


class TestWIndicator:
    def test_single_point(self):
        centers = EquidistributedCenters(L=1, d=1, delta=0.05, centers=[[0.0]])
        grid = GridSpec(d=1, L=1, n_h=2)
        assert np.array_equal(w_indicator(centers, grid), [1.0])

    def test_empty_centers(self):
        centers = EquidistributedCenters(L=1, d=1, delta=0.05,
                                         centers=np.empty((0, 1)))
        grid = GridSpec(d=1, L=1, n_h=8)
        assert np.array_equal(w_indicator(centers, grid), np.zeros(7))

    def test_grid_point_center(self):
        omega = const_omega(0.25)
        centers = increment_centers(omega, 0.1)
        grid = GridSpec(d=1, L=3, n_h=10)  # spacing 0.1 puts 0.3 on the grid
        w = w_indicator(centers, grid)
        k = int(np.argmin(np.abs(grid.axis_coords() - 0.3)))
        assert w[k] == 1.0

    def test_box_mismatch(self):
        centers = EquidistributedCenters(L=1, d=1, delta=0.05, centers=[[0.0]])
        with pytest.raises(ValueError):
            w_indicator(centers, GridSpec(d=1, L=3, n_h=2))


class TestIncrementBound:
    @given(seed=st.integers(0, 2**32 - 1), delta=st.floats(0.01, 0.099),
           shape=st.sampled_from(["ball", "cube"]))
    @settings(max_examples=60, deadline=None)
    def test_pointwise_lower_bound(self, seed, delta, shape):
        grid = GridSpec(d=1, L=3, n_h=8)
        omega = sample_omega(UNIFORM, 3, seed)
        v0 = potential_on_grid(omega, shape, grid).astype(int)
        v1 = potential_on_grid(shift_all(omega, delta), shape, grid).astype(int)
        w = w_indicator(increment_centers(omega, delta), grid).astype(int)
        assert np.all(v1 - v0 >= w)

    @pytest.mark.parametrize("shape", ["ball", "cube"])
    def test_pointwise_lower_bound_d2(self, shape):
        grid = GridSpec(d=2, L=3, n_h=8)
        omega = sample_omega(UNIFORM, 3, seed=31, d=2)
        v0 = potential_on_grid(omega, shape, grid).astype(int)
        v1 = potential_on_grid(shift_all(omega, 0.08), shape, grid).astype(int)
        w = w_indicator(increment_centers(omega, 0.08), grid).astype(int)
        assert np.all(v1 - v0 >= w)


class TestJson:
    @pytest.mark.parametrize("d", [1, 2])
    def test_round_trip_exact(self, d):
        omega = sample_omega(UNIFORM, 3, seed=99, d=d)
        back = omega_from_json(omega_to_json(omega))
        assert back.L == omega.L and back.d == omega.d
        assert np.array_equal(back.radii, omega.radii)

    def test_rejects_scrambled_sites(self):
        omega = sample_omega(UNIFORM, 3, seed=99)
        text = omega_to_json(omega)
        tampered = text.replace("[[-1]", "[[7]", 1)
        with pytest.raises(ValueError):
            omega_from_json(tampered)
