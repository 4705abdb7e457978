"""The random breather potential: i.i.d. radii attached to lattice sites.

A configuration omega assigns to every integer site j of the box a radius
omega_j drawn i.i.d. from a measure with bounded density supported in
[omega_minus, omega_plus], a subset of [0, 1/2).  The potential is

    V_omega(x) = sum_j chi_{B_{omega_j}}(x - j)          (shape "ball")
    V_omega(x) = sum_j chi_{Lambda_{2 omega_j}}(x - j)   (shape "cube")

with open balls and open cubes; since all radii stay below 1/2 the bumps
never overlap and V_omega takes values in {0, 1}.  Shifted configurations
omega + delta (all sites) and omega + delta e_i (one site) may carry radii
up to exactly 1/2.

Sampling is counter-based: each site owns a Philox stream keyed by
(seed, encoded site index), so samples are reproducible bit for bit and do
not depend on evaluation order or thread count.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .grid_operator import GridSpec

SingleSiteShape = Literal["ball", "cube"]

SHAPES = ("ball", "cube")

# Sites are encoded into one 64-bit Philox key word by packing each signed
# coordinate into 21 bits; coordinates must stay inside (-2^20, 2^20).
_SITE_OFFSET = 1 << 20
_SITE_BITS = 21

# Tolerance for the domain check omega_j + delta <= 1/2.  Float addition
# can overshoot the exact bound by one ulp (0.4 + 0.1 > 0.5); shifted
# values inside the tolerance are clipped back to exactly 1/2.
_HALF_TOL = 1e-9


def _check_shape(shape: str) -> None:
    if shape not in SHAPES:
        raise ValueError(f"unknown single-site shape {shape!r}")


@dataclass(frozen=True)
class MeasureSpec:
    """Single-site measure: a bounded density on [omega_minus, omega_plus].

    ``density`` is "uniform" or "truncated_linear"; the latter has density
    proportional to 1 + slope * (x - omega_minus), normalized over the
    support, and exists so that code paths with density_sup different from
    1/width get exercised.
    """

    omega_minus: float
    omega_plus: float
    density: str = "uniform"
    slope: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.omega_minus < self.omega_plus < 0.5:
            raise ValueError(
                "measure support must satisfy 0 <= omega_minus < omega_plus < 1/2, "
                f"got [{self.omega_minus}, {self.omega_plus}]"
            )
        if self.density not in ("uniform", "truncated_linear"):
            raise ValueError(f"unknown density family {self.density!r}")
        if self.density == "truncated_linear":
            if 1.0 + self.slope * self.width <= 0.0:
                raise ValueError("truncated_linear density must stay positive")
        elif self.slope != 0.0:
            raise ValueError("slope is only meaningful for truncated_linear")

    @property
    def width(self) -> float:
        return self.omega_plus - self.omega_minus

    @property
    def density_sup(self) -> float:
        """Sup of the normalized density nu over the support."""
        if self.density == "uniform":
            return 1.0 / self.width
        c = self._norm
        return c * max(1.0, 1.0 + self.slope * self.width)

    @property
    def _norm(self) -> float:
        # normalization constant for truncated_linear
        w = self.width
        return 1.0 / (w + 0.5 * self.slope * w * w)

    def pdf(self, x):
        """The normalized density nu at x; zero outside the support."""
        x = np.asarray(x, dtype=float)
        inside = (x >= self.omega_minus) & (x <= self.omega_plus)
        if self.density == "uniform":
            out = np.where(inside, 1.0 / self.width, 0.0)
        else:
            out = np.where(
                inside,
                self._norm * (1.0 + self.slope * (x - self.omega_minus)),
                0.0,
            )
        return float(out) if out.ndim == 0 else out

    def mean(self) -> float:
        """The expectation of a single radius."""
        if self.density == "uniform":
            return self.omega_minus + 0.5 * self.width
        w = self.width
        c = self._norm
        # int_0^w x (1 + s x) dx = w^2/2 + s w^3/3
        return self.omega_minus + c * (0.5 * w * w + self.slope * w**3 / 3.0)

    def inv_cdf(self, u):
        """Map uniform [0, 1) variates to radii; vectorized."""
        u = np.asarray(u, dtype=float)
        if self.density == "uniform":
            x = u * self.width
        else:
            s = self.slope
            c = self._norm
            if s == 0.0:
                x = u * self.width
            else:
                # solve c (x + s x^2 / 2) = u on [0, width]
                x = (np.sqrt(1.0 + 2.0 * s * u / c) - 1.0) / s
        return self.omega_minus + x


def lattice_sites(L: int, d: int) -> list[tuple[int, ...]]:
    """Integer sites of the box, lexicographically ordered; L^d of them."""
    r = (L - 1) // 2
    return list(itertools.product(range(-r, r + 1), repeat=d))


def _site_code(site: tuple[int, ...]) -> int:
    code = 0
    for c in site:
        code = (code << _SITE_BITS) | (c + _SITE_OFFSET)
    return code


@dataclass(frozen=True)
class OmegaSample:
    """One realization of the radii, in lexicographic site order.

    ``radii[k]`` belongs to ``lattice_sites(L, d)[k]``.  Values live in
    [0, 1/2]; the upper end is reachable only through shifts.
    """

    L: int
    d: int
    radii: np.ndarray = field(repr=False)

    def __post_init__(self):
        radii = np.asarray(self.radii, dtype=float)
        object.__setattr__(self, "radii", radii)
        if radii.shape != (self.L**self.d,):
            raise ValueError(
                f"expected {self.L ** self.d} radii for L={self.L}, d={self.d}, "
                f"got shape {radii.shape}"
            )
        if np.any(radii < 0.0) or np.any(radii > 0.5):
            raise ValueError("radii must lie in [0, 1/2]")

    @property
    def sites(self) -> list[tuple[int, ...]]:
        return lattice_sites(self.L, self.d)

    def value(self, site: tuple[int, ...] | int) -> float:
        if isinstance(site, int):
            site = (site,)
        idx = self.sites.index(tuple(site))
        return float(self.radii[idx])

    def max_radius(self) -> float:
        return float(self.radii.max())


def sample_omega(measure: MeasureSpec, L: int, seed: int, d: int = 1) -> OmegaSample:
    """Draw one i.i.d. configuration, reproducibly.

    Every site gets its own Philox stream keyed by (seed, site code), so
    the value at a site does not depend on the order sites are visited.
    """
    if L < 1 or L % 2 == 0:
        raise ValueError(f"box side must be an odd positive integer, got {L}")
    sites = lattice_sites(L, d)
    u = np.empty(len(sites))
    for k, site in enumerate(sites):
        key = np.array([seed, _site_code(site)], dtype=np.uint64)
        u[k] = np.random.Generator(np.random.Philox(key=key)).random()
    return OmegaSample(L=L, d=d, radii=measure.inv_cdf(u))


def evaluate_potential(omega: OmegaSample, shape: SingleSiteShape, x) -> int:
    """V_omega at a single point; 0 or 1.  Membership is strict (open sets)."""
    _check_shape(shape)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (omega.d,):
        raise ValueError(f"point has shape {x.shape}, expected ({omega.d},)")
    if np.any(np.abs(x) > 0.5 * omega.L):
        raise ValueError(f"point {x} lies outside the closed box of side {omega.L}")
    total = 0
    for site, r in zip(omega.sites, omega.radii):
        diff = x - np.asarray(site, dtype=float)
        if shape == "ball":
            inside = math.sqrt(float(np.dot(diff, diff))) < r
        else:
            inside = float(np.max(np.abs(diff))) < r
        total += int(inside)
    return total


def potential_on_grid(
    omega: OmegaSample, shape: SingleSiteShape, grid: GridSpec
) -> np.ndarray:
    """V_omega sampled at all grid points; a {0,1} float vector of length n_dof.

    Vectorized per site over the bounding block of its bump, so the cost is
    proportional to the support volume rather than n_dof * L^d.
    """
    _check_shape(shape)
    if grid.d != omega.d:
        raise ValueError(f"grid dimension {grid.d} != sample dimension {omega.d}")
    if grid.L != omega.L:
        raise ValueError(f"grid box side {grid.L} != sample box side {omega.L}")
    coords = grid.axis_coords()
    m = grid.n_side
    out = np.zeros((m,) * grid.d)
    for site, r in zip(omega.sites, omega.radii):
        if r <= 0.0:
            continue
        slices = []
        local = []
        for a in range(grid.d):
            lo = np.searchsorted(coords, site[a] - r, side="right")
            hi = np.searchsorted(coords, site[a] + r, side="left")
            # strict membership: trim endpoints that land exactly on the
            # boundary (searchsorted sides already exclude them)
            slices.append(slice(lo, hi))
            local.append(coords[lo:hi] - site[a])
        if any(s.start >= s.stop for s in slices):
            continue
        if shape == "cube":
            out[tuple(slices)] = 1.0
        else:
            mesh = np.meshgrid(*local, indexing="ij")
            dist2 = sum(c * c for c in mesh)
            block = out[tuple(slices)]
            block[dist2 < r * r] = 1.0
    return out.ravel()


def _shifted(values: np.ndarray, delta) -> np.ndarray:
    shifted = values + delta
    over = shifted - 0.5
    if np.any(over > _HALF_TOL):
        bad = float(shifted.max())
        raise ValueError(f"shifted radius {bad} exceeds 1/2")
    return np.minimum(shifted, 0.5)


def shift_all(omega: OmegaSample, delta: float) -> OmegaSample:
    """The configuration omega + delta (every site)."""
    if delta < 0:
        raise ValueError("shift must be nonnegative")
    return OmegaSample(L=omega.L, d=omega.d, radii=_shifted(omega.radii, delta))


def shift_one(omega: OmegaSample, site: tuple[int, ...] | int, delta: float) -> OmegaSample:
    """The configuration omega + delta e_site (only one site changed)."""
    if delta < 0:
        raise ValueError("shift must be nonnegative")
    if isinstance(site, int):
        site = (site,)
    site = tuple(site)
    sites = omega.sites
    if site not in sites:
        raise ValueError(f"site {site} is not in the box of side {omega.L}")
    idx = sites.index(site)
    bump = np.zeros_like(omega.radii)
    bump[idx] = delta
    return OmegaSample(L=omega.L, d=omega.d, radii=_shifted(omega.radii, bump))


@dataclass(frozen=True)
class EquidistributedCenters:
    """Centers x_j with B_delta(x_j) contained in the unit cell around j.

    ``delta`` is the common ball radius.  ``centers[k]`` belongs to
    ``lattice_sites(L, d)[k]``.
    """

    L: int
    d: int
    delta: float
    centers: np.ndarray = field(repr=False)

    def __post_init__(self):
        centers = np.atleast_2d(np.asarray(self.centers, dtype=float))
        object.__setattr__(self, "centers", centers)
        if not 0.0 < self.delta < 0.5:
            raise ValueError(f"radius must lie in (0, 1/2), got {self.delta}")
        if centers.size and centers.shape != (self.L**self.d, self.d):
            raise ValueError(
                f"expected centers of shape ({self.L ** self.d}, {self.d}), "
                f"got {centers.shape}"
            )
        sites = np.asarray(lattice_sites(self.L, self.d), dtype=float)
        if centers.size:
            margin = np.abs(centers - sites).max() + self.delta
            if margin > 0.5 + _HALF_TOL:
                raise ValueError(
                    f"ball of radius {self.delta} around a center leaves its "
                    f"unit cell (reach {margin} > 1/2)"
                )

    @property
    def sites(self) -> list[tuple[int, ...]]:
        return lattice_sites(self.L, self.d)


def increment_centers(omega: OmegaSample, delta: float) -> EquidistributedCenters:
    """Centers of balls of radius delta/2 inside supp(V_{omega+delta} - V_omega).

    For both shapes the center is x_j = j + (omega_j + delta/2) e_1: for
    balls this is the midline of the annulus of width delta, for cubes the
    midline of the +e_1 face slab of the cube shell.  In both cases the
    open ball B_{delta/2}(x_j) sits inside the shell and inside the unit
    cell around j, which makes the family (delta/2)-equidistributed.
    """
    if not delta > 0:
        raise ValueError("shift must be positive")
    _shifted(omega.radii, delta)  # reuse the domain check
    sites = np.asarray(lattice_sites(omega.L, omega.d), dtype=float)
    centers = sites.copy()
    centers[:, 0] += omega.radii + 0.5 * delta
    return EquidistributedCenters(
        L=omega.L, d=omega.d, delta=0.5 * delta, centers=centers
    )


def w_indicator(centers: EquidistributedCenters, grid: GridSpec) -> np.ndarray:
    """Indicator of the union of open balls B_delta(x_j) on the grid points."""
    if grid.d != centers.d or grid.L != centers.L:
        raise ValueError("grid and centers describe different boxes")
    coords = grid.axis_coords()
    m = grid.n_side
    out = np.zeros((m,) * grid.d)
    r = centers.delta
    for center in centers.centers:
        slices = []
        local = []
        for a in range(grid.d):
            lo = np.searchsorted(coords, center[a] - r, side="right")
            hi = np.searchsorted(coords, center[a] + r, side="left")
            slices.append(slice(lo, hi))
            local.append(coords[lo:hi] - center[a])
        if any(s.start >= s.stop for s in slices):
            continue
        mesh = np.meshgrid(*local, indexing="ij")
        dist2 = sum(c * c for c in mesh)
        block = out[tuple(slices)]
        block[dist2 < r * r] = 1.0
    return out.ravel()


def omega_to_json(omega: OmegaSample) -> str:
    """Serialize a configuration; floats round-trip exactly."""
    sites = [[list(site), float(v)] for site, v in zip(omega.sites, omega.radii)]
    return json.dumps({"L": omega.L, "d": omega.d, "sites": sites})


def omega_from_json(text: str) -> OmegaSample:
    obj = json.loads(text)
    sites = lattice_sites(obj["L"], obj["d"])
    listed = [tuple(s) for s, _ in obj["sites"]]
    if listed != sites:
        raise ValueError("site list is not the lexicographic enumeration of the box")
    radii = np.array([v for _, v in obj["sites"]], dtype=float)
    return OmegaSample(L=obj["L"], d=obj["d"], radii=radii)
