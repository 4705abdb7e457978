"""End-to-end acceptance gate.

Each test exercises one acceptance criterion at its stated tolerance and
prints a single pass/fail line (visible under pytest -s).  Tests compute
violation counts first and assert once at the end, so the line is printed
whether or not the criterion holds.
"""

import math
import time

import numpy as np
import pytest

from breather_lab.breather_field import (
    OmegaSample,
    increment_centers,
    potential_on_grid,
    sample_omega,
    shift_all,
    w_indicator,
)
from breather_lab.eigensolve import (
    SmoothSwitch,
    Spectrum,
    eigen_lowest,
    smooth_switch_deriv,
    smooth_switch_eval,
)
from breather_lab.cli_runner import parse_config, run_experiment
from breather_lab.grid_operator import GridSpec, assemble_hamiltonian, converged_mask
from breather_lab.ssf_lab import (
    ft_eval,
    hs_majorization_sides,
    invariance_check,
    krein_check,
    legendre_gt,
    singular_bound,
    spectral_shift,
    ssf_ft_integral,
    veff_singular_values,
    weyl_lower_bound,
)
from breather_lab.ucp_probe import fit_ucp_exponents, lifting_check, ucp_constant
from breather_lab.wegner_mc import (
    WegnerParams,
    epsilon_max,
    wegner_expectation,
    wegner_rhs,
)

from conftest import UNIFORM


def record(num: int, name: str, ok: bool, detail: str = ""):
    line = f"criterion {num:2d} [{'PASS' if ok else 'FAIL'}] {name}"
    if detail:
        line += f": {detail}"
    print(line)
    assert ok, line


def dense_spectrum(H) -> np.ndarray:
    return np.linalg.eigvalsh(np.asarray(H.toarray() if hasattr(H, "toarray")
                                         else H))


def breather_pair(L, seed, n_h, delta, d=1, shape="ball"):
    grid = GridSpec(d=d, L=L, n_h=n_h)
    omega = sample_omega(UNIFORM, L, seed, d)
    h0 = assemble_hamiltonian(grid, potential_on_grid(omega, shape, grid), None)
    h1 = assemble_hamiltonian(
        grid, potential_on_grid(shift_all(omega, delta), shape, grid), None
    )
    return h0, h1


@pytest.fixture(scope="module")
def fitted():
    """UCP exponents fitted over the criterion-4 population, plus the
    time that took (charged to the criterion-4 budget)."""
    start = time.monotonic()
    b, n_h = 40.0, 256
    samples = []
    for L in (1, 3, 5):
        grid = GridSpec(d=1, L=L, n_h=n_h)
        for seed in (1, 2, 3):
            omega = sample_omega(UNIFORM, L, seed)
            for delta in (0.02, 0.05, 0.1):
                shifted = shift_all(omega, delta)
                h = assemble_hamiltonian(
                    grid, potential_on_grid(shifted, "ball", grid), None
                )
                w = w_indicator(increment_centers(omega, delta), grid)
                c = ucp_constant(h, b, w)
                # roundoff-scale constants signal a singular Gram, which is
                # a resolution artifact rather than a UCP observation
                if c is not None and c > 1e-12:
                    samples.append((0.5 * delta, c))
    constants = fit_ucp_exponents(samples, b)
    return {
        "constants": constants,
        "b": b,
        "n_h": n_h,
        "fit_seconds": time.monotonic() - start,
        "n_samples": len(samples),
    }


def test_criterion_01_free_spectrum_fidelity():
    start = time.monotonic()
    grid = GridSpec(d=1, L=1, n_h=256)
    h = assemble_hamiltonian(grid, np.zeros(grid.n_dof), None)
    spec = eigen_lowest(h, math.inf)
    vals = spec.eigenvalues
    analytic_ok = all(
        abs(vals[k - 1] - math.pi**2 * k**2) <= 0.01 * math.pi**2 * k**2
        for k in range(1, 5)
    )
    exact_gap = max(
        abs(vals[k - 1] - (4.0 / grid.h**2) * math.sin(k * math.pi * grid.h / 2) ** 2)
        for k in range(1, vals.size + 1)
    )
    elapsed = time.monotonic() - start
    record(
        1,
        "free-spectrum fidelity",
        analytic_ok and exact_gap <= 1e-9 and elapsed < 5.0,
        f"first-4 within 1% of (pi k)^2, discrete gap {exact_gap:.2e}, "
        f"{elapsed:.1f}s",
    )


def test_criterion_02_weyl_lower_bound():
    start = time.monotonic()
    configs = [(1, L, 16, seed) for L in (1, 3, 5) for seed in range(1, 16)]
    configs += [(2, 3, 8, seed) for seed in range(1, 6)]
    assert len(configs) == 50
    violations = 0
    checked = 0
    for d, L, n_h, seed in configs:
        grid = GridSpec(d=d, L=L, n_h=n_h)
        omega = sample_omega(UNIFORM, L, seed, d)
        h = assemble_hamiltonian(grid, potential_on_grid(omega, "ball", grid), None)
        vals = dense_spectrum(h)
        for i in np.flatnonzero(converged_mask(vals, grid)):
            checked += 1
            if vals[i] < weyl_lower_bound(int(i) + 1, float(L**d), d):
                violations += 1
    elapsed = time.monotonic() - start
    record(
        2,
        "Weyl lower bound on converged eigenvalues",
        violations == 0 and elapsed < 120.0,
        f"{violations} violations in {checked} eigenvalues over 50 configs, "
        f"{elapsed:.1f}s",
    )


def test_criterion_03_potential_increment_bound():
    rng = np.random.default_rng(2026)
    cases = [(1, 5, 16, "ball")] * 40 + [(1, 5, 16, "cube")] * 40
    cases += [(2, 3, 8, "ball")] * 10 + [(2, 3, 8, "cube")] * 10
    violations = 0
    for i, (d, L, n_h, shape) in enumerate(cases):
        grid = GridSpec(d=d, L=L, n_h=n_h)
        omega = sample_omega(UNIFORM, L, 3000 + i, d)
        delta = float(rng.uniform(0.01, 0.099))
        v0 = potential_on_grid(omega, shape, grid)
        v1 = potential_on_grid(shift_all(omega, delta), shape, grid)
        w = w_indicator(increment_centers(omega, delta), grid)
        if not np.all(v1 - v0 >= w):
            violations += 1
    record(
        3,
        "potential increment dominates the annuli indicator",
        violations == 0,
        f"{violations} violations in {len(cases)} random (omega, delta), "
        f"both shapes",
    )


def test_criterion_04_monotonicity_and_lifting(fitted):
    start = time.monotonic()
    constants = fitted["constants"]
    total = 0
    mono_viol = 0
    lift_ok = 0
    for L in (1, 3, 5):
        grid = GridSpec(d=1, L=L, n_h=fitted["n_h"])
        for seed in (1, 2, 3):
            omega = sample_omega(UNIFORM, L, seed)
            for delta in (0.02, 0.05, 0.1):
                for r in lifting_check(omega, delta, constants, fitted["b"],
                                       grid, "ball"):
                    total += 1
                    if r.monotonicity_margin < -1e-8:
                        mono_viol += 1
                    if r.lifting_margin >= 0.0:
                        lift_ok += 1
    elapsed = time.monotonic() - start + fitted["fit_seconds"]
    rate = lift_ok / total
    record(
        4,
        "eigenvalue monotonicity and UCP lifting",
        mono_viol == 0 and rate >= 0.99 and elapsed < 300.0,
        f"monotonicity violations {mono_viol}/{total}, lifting rate "
        f"{rate:.2%} (kappa {constants.kappa:.3e}, M {constants.M:.2f}), "
        f"{elapsed:.0f}s incl. fit",
    )


def test_criterion_05_krein_and_invariance():
    start = time.monotonic()
    b = 20.0
    switch = SmoothSwitch(1.0)
    worst_rel = 0.0
    for seed in range(1, 31):
        h0, h1 = breather_pair(3, seed, 8, 0.05)
        lhs, _, gap = krein_check(
            h0,
            h1,
            lambda x: smooth_switch_eval(switch, np.asarray(x) - (b - 1.0)),
            lambda x: smooth_switch_deriv(switch, np.asarray(x) - (b - 1.0)),
            b,
        )
        worst_rel = max(worst_rel, gap / (1.0 + abs(lhs)))
    rng = np.random.default_rng(17)
    mismatches = 0
    n_lambda = 0
    for seed in range(1, 6):
        h0, h1 = breather_pair(3, seed, 8, 0.05)
        s0 = Spectrum(eigenvalues=dense_spectrum(h0), b=np.inf)
        s1 = Spectrum(eigenvalues=dense_spectrum(h1), b=np.inf)
        all_vals = np.concatenate([s0.eigenvalues, s1.eigenvalues])
        while n_lambda < 60 * seed:
            lam = float(rng.uniform(0.0, 20.0))
            if np.min(np.abs(all_vals - lam)) < 1e-6:
                continue
            n_lambda += 1
            lhs_c, rhs_c = invariance_check(s0, s1, lam)
            if lhs_c != rhs_c:
                mismatches += 1
    elapsed = time.monotonic() - start
    record(
        5,
        "Krein identity and invariance principle",
        worst_rel <= 1e-8 and mismatches == 0 and elapsed < 60.0,
        f"worst relative Krein gap {worst_rel:.2e} over 30 pairs, "
        f"{mismatches} mismatches at {n_lambda} random lambda, {elapsed:.1f}s",
    )


def single_cube_mu(n_h):
    grid = GridSpec(d=1, L=5, n_h=n_h)
    radii = np.zeros(5)
    radii[2] = 0.4
    omega = OmegaSample(L=5, d=1, radii=radii)
    v = potential_on_grid(omega, "cube", grid)
    h0 = assemble_hamiltonian(grid, np.zeros_like(v), None)
    h1 = assemble_hamiltonian(grid, v, None)
    mu = veff_singular_values(h0, h1)
    return np.array([mu.mu(n) for n in range(1, len(mu) + 1)])


def test_criterion_06_singular_value_decay():
    start = time.monotonic()
    mus = {n_h: single_cube_mu(n_h) for n_h in (8, 16, 32)}
    violations = sum(
        1
        for arr in mus.values()
        for n in range(5, arr.size + 1)
        if arr[n - 1] > 2.0 * singular_bound(n, 1)
    )
    # refinement accuracy margin: successive differences must shrink
    m = mus[8].size
    cauchy_16 = float(np.max(np.abs(mus[16][:m] - mus[8][:m])))
    cauchy_32 = float(np.max(np.abs(mus[32][:m] - mus[16][:m])))
    elapsed = time.monotonic() - start
    record(
        6,
        "singular-value decay of the semigroup difference",
        violations == 0 and cauchy_32 < cauchy_16 and elapsed < 60.0,
        f"{violations} bound violations (slack 2), refinement increments "
        f"{cauchy_16:.2e} -> {cauchy_32:.2e}, {elapsed:.1f}s",
    )


def test_criterion_07_ft_machinery():
    t = 1.0 / 32.0
    T = 10.0
    k1_et = 128.0 * math.exp(T)
    integral_viol = 0
    major_viol = 0
    for seed in range(1, 21):
        h0, h1 = breather_pair(5, seed, 8, 0.05)
        e0 = dense_spectrum(h0)
        e1 = dense_spectrum(h1)
        xi = spectral_shift(
            Spectrum(eigenvalues=e0, b=np.inf), Spectrum(eigenvalues=e1, b=np.inf)
        )
        if not 0.0 <= ssf_ft_integral(xi, T, t, 1) <= k1_et:
            integral_viol += 1
        exp_xi = spectral_shift(
            Spectrum(eigenvalues=np.sort(np.exp(-e1)), b=np.inf),
            Spectrum(eigenvalues=np.sort(np.exp(-e0)), b=np.inf),
        )
        lhs, rhs = hs_majorization_sides(exp_xi, veff_singular_values(h0, h1),
                                         t, 1)
        if lhs > rhs + 1e-8:
            major_viol += 1
    young_viol = 0
    for d in (1, 2):
        for x in np.linspace(0.0, 5.0, 21):
            for y in np.linspace(0.0, 50.0, 21):
                if x * y > ft_eval(t, d, x) + legendre_gt(t, d, y) + 1e-8:
                    young_viol += 1
    record(
        7,
        "F_t integral bound, majorization, Young/Legendre",
        integral_viol == 0 and major_viol == 0 and young_viol == 0,
        f"20 pairs: {integral_viol} integral, {major_viol} majorization, "
        f"{young_viol} Young violations",
    )


def test_criterion_08_telescope_and_averaging():
    from breather_lab.wegner_mc import averaging_lemma_check, telescope

    worst_identity = 0.0
    avg_viol = 0
    for seed in (7, 11, 23):
        grid = GridSpec(d=1, L=3, n_h=16)
        omega = sample_omega(UNIFORM, 3, seed)
        state = telescope(omega, 0.05, 8.3, 1.0, 20.0, grid, "ball")
        worst_identity = max(
            worst_identity,
            float(state.chain_gaps.max(initial=0.0)),
            max(state.endpoint_gaps),
            state.sum_gap,
        )
        knots = np.linspace(0.1, 0.45, 16)
        for n in (1, 2, 3):
            values = np.array([state.theta(n, float(u)) for u in knots])
            lhs, rhs = averaging_lemma_check((knots, values), UNIFORM, 0.05)
            if lhs > rhs + 1e-12:
                avg_viol += 1
    record(
        8,
        "telescoping identities and averaging lemma",
        worst_identity <= 1e-8 and avg_viol == 0,
        f"worst identity gap {worst_identity:.2e}, {avg_viol} averaging "
        f"violations over 9 tabulated traces",
    )


def test_criterion_09_conditional_wegner(fitted):
    start = time.monotonic()
    constants = fitted["constants"]
    b, n_h, n_samples = 20.0, 16, 500
    eps_all = (0.05, 0.1, 0.2)
    emax = epsilon_max(constants, UNIFORM.omega_plus)
    admissible = [e for e in eps_all if e <= emax]

    bound_viol = 0
    cells = []
    for L in (3, 5, 7):
        for E in (4.0, 9.0):
            for eps in eps_all:
                params = WegnerParams(
                    b=b, E=E, epsilon=eps, measure=UNIFORM, shape="ball",
                    grid=GridSpec(d=1, L=L, n_h=n_h), n_samples=n_samples,
                    master_seed=1,
                )
                rep = wegner_expectation(params, threads=4)
                rhs = wegner_rhs(eps, L, 1, b, constants, UNIFORM.density_sup)
                cells.append((L, E, eps, rep.mean, rep.stderr, rhs))
                if eps in admissible and rep.mean > rhs:
                    bound_viol += 1
    # scaling clause on admissible cells; checked additionally on a window
    # that an exact eigenvalue count makes deterministic
    scaling_viol = 0
    for E in (4.0, 9.0):
        for eps in admissible:
            per_L = [
                (mean / L, err / L)
                for (L, e_val, e_eps, mean, err, _) in cells
                if e_val == E and e_eps == eps
            ]
            for (ma, sa), (mb, sb) in zip(per_L, per_L[1:]):
                if abs(ma - mb) > 3.0 * math.hypot(sa, sb):
                    scaling_viol += 1
    window = {}
    for L in (3, 5, 7):
        params = WegnerParams(
            b=b, E=6.1, epsilon=5.9, measure=UNIFORM, shape="ball",
            grid=GridSpec(d=1, L=L, n_h=n_h), n_samples=40, master_seed=1,
        )
        rep = wegner_expectation(params, threads=4)
        window[L] = (rep.mean / L, rep.stderr / L)
    window_ok = all(m == 1.0 and s == 0.0 for m, s in window.values())

    informational = sum(1 for *_, mean, _, rhs in cells if mean > rhs)
    elapsed = time.monotonic() - start
    if not admissible:
        print(
            "criterion  9 note: fitted kappa "
            f"{constants.kappa:.3e}, M {constants.M:.2f} give epsilon_max "
            f"{emax:.2e}; every requested eps in {eps_all} exceeds it, so "
            "the conditional bound is vacuously satisfied at this scale. "
            f"Unfiltered cells are informational: {informational} of "
            f"{len(cells)} exceed the formal rhs."
        )
    record(
        9,
        "conditional Wegner bound and volume scaling",
        bound_viol == 0 and scaling_viol == 0 and window_ok
        and elapsed < 600.0,
        f"{len(admissible)} of {len(eps_all)} eps admissible, "
        f"{bound_viol} bound and {scaling_viol} scaling violations, "
        f"window means/L {sorted(m for m, _ in window.values())}, "
        f"{elapsed:.0f}s",
    )


def test_criterion_10_determinism(tmp_path):
    toml = (
        "[model]\nomega_minus = 0.1\nomega_plus = 0.4\n"
        "[grid]\nL = 3\nn_h = 16\n"
        "[experiment]\nkind = \"wegner\"\nb = 20.0\nE = 5.0\n"
        "eps = 0.5\nn_samples = 16\n"
        "[run]\nmaster_seed = 5\nthreads = {threads}\nout_dir = \"{out}\"\n"
    )
    blobs = []
    for name, threads in (("a", 1), ("b", 1), ("c", 8)):
        out = tmp_path / name
        code = run_experiment(parse_config(toml.format(threads=threads, out=out)))
        assert code == 0
        blobs.append((out / "wegner_samples_L3_eps0.5.csv").read_bytes())
    record(
        10,
        "bitwise deterministic per-sample output",
        blobs[0] == blobs[1] == blobs[2],
        "identical CSV across rerun and thread counts {1, 8}",
    )
