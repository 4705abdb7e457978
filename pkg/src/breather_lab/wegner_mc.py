"""Monte Carlo eigenvalue counting in small windows, and the chain of
inequalities that bounds its expectation.

The pipeline mirrors a proof by telescoping over single-site radius
shifts: a smooth switch rho sandwiches the window count, single-site
shifts are chained through intermediate configurations, a one-dimensional
averaging lemma converts each chained difference into a derivative of the
site's distribution, and a closed-form spread bound on the switch traces
caps the total.  The end product is the closed-form right-hand side
wegner_rhs, proportional to eps^(1/M) |ln eps|^d L^d, against which the
sampled means are compared.

All quantitative claims here are conditional on the fitted
unique-continuation constants (kappa, M); reports carry those constants
rather than asserting them.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .breather_field import (
    MeasureSpec,
    OmegaSample,
    SingleSiteShape,
    potential_on_grid,
    sample_omega,
    shift_all,
)
from .eigensolve import (
    EigensolveError,
    Spectrum,
    count_below,
    trace_rho,
    trace_spectral_projector,
)
from .grid_operator import GridSpec, MagneticSpec, assemble_hamiltonian
from .ucp_probe import UcpConstants


class BoundViolationError(ArithmeticError):
    """A checked inequality failed beyond its documented tolerance."""


_IDENTITY_TOL = 1e-8


def delta_from_epsilon(eps: float, constants: UcpConstants) -> float:
    """The radius shift 2 * (4 eps / kappa)^M whose lifting margin is 4 eps."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    return 2.0 * (4.0 * eps / constants.kappa) ** constants.M


def epsilon_max(constants: UcpConstants, omega_plus: float) -> float:
    """(kappa/4) * ((1/2 - omega_plus)/2)^M, the largest admissible window
    half-width; keeps delta_from_epsilon within the room left above
    omega_plus."""
    if not omega_plus < 0.5:
        raise ValueError("omega_plus must be below 1/2")
    return (
        constants.kappa / 4.0 * ((0.5 - omega_plus) / 2.0) ** constants.M
    )


def wegner_rhs(
    eps: float,
    L: int,
    d: int,
    b: float,
    constants: UcpConstants,
    density_sup: float,
    omega_plus: float | None = None,
) -> float:
    """C * (4/kappa)^(1/M) * ||nu||_inf * eps^(1/M) * |ln eps|^d * L^d with
    C = 2 * 32^d * (2 e^b (d+1)! + 2^d).

    When ``omega_plus`` is supplied, eps is additionally checked against
    epsilon_max for the given constants.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    if omega_plus is not None and eps > epsilon_max(constants, omega_plus):
        raise ValueError(
            f"eps {eps} exceeds epsilon_max "
            f"{epsilon_max(constants, omega_plus)}"
        )
    c_const = 2.0 * 32**d * (2.0 * math.exp(b) * math.factorial(d + 1) + 2**d)
    return (
        c_const
        * (4.0 / constants.kappa) ** (1.0 / constants.M)
        * density_sup
        * eps ** (1.0 / constants.M)
        * abs(math.log(eps)) ** d
        * L**d
    )


def derive_sample_seed(master_seed: int, sample_index: int) -> int:
    """Splittable per-sample seed; independent of evaluation order."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(sample_index,))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class WegnerParams:
    """One Monte Carlo cell: a window [E - eps, E + eps] on one box."""

    b: float
    E: float
    epsilon: float
    measure: MeasureSpec
    shape: SingleSiteShape
    grid: GridSpec
    n_samples: int
    master_seed: int
    constants: UcpConstants | None = None
    magnetic: MagneticSpec | None = None

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("window half-width must be positive")
        if self.E + self.epsilon > self.b - 1.0:
            raise ValueError(
                f"window [E - eps, E + eps] must stay below b - 1 = {self.b - 1.0}"
            )
        if self.n_samples < 1:
            raise ValueError("need at least one sample")
        if self.constants is not None:
            emax = epsilon_max(self.constants, self.measure.omega_plus)
            if self.epsilon > emax:
                raise ValueError(
                    f"eps {self.epsilon} exceeds epsilon_max {emax} for the "
                    f"supplied constants"
                )


@dataclass(frozen=True)
class WegnerReport:
    """Monte Carlo outcome; counts[i] is -1 for excluded samples."""

    params: WegnerParams
    counts: np.ndarray = field(repr=False)
    seeds: np.ndarray = field(repr=False)
    mean: float
    stderr: float
    rhs_bound: float | None
    excluded: int


def wegner_expectation(params: WegnerParams, threads: int = 1) -> WegnerReport:
    """Sampled mean of the window eigenvalue count.

    Sample s draws its configuration from (master_seed, s) through the
    splittable derivation, so results do not depend on thread count or
    execution order.  Per-sample solver failures are excluded and counted;
    more than 1% exclusions fail the whole report.
    """
    n = params.n_samples
    seeds = np.array(
        [derive_sample_seed(params.master_seed, s) for s in range(1, n + 1)],
        dtype=np.uint64,
    )

    def one(idx: int) -> int:
        omega = sample_omega(
            params.measure, params.grid.L, int(seeds[idx]), params.grid.d
        )
        v = potential_on_grid(omega, params.shape, params.grid)
        h = assemble_hamiltonian(params.grid, v, params.magnetic)
        return trace_spectral_projector(h, params.E, params.epsilon)

    counts = np.full(n, -1, dtype=np.int64)
    failures = 0
    if threads <= 1:
        for i in range(n):
            try:
                counts[i] = one(i)
            except EigensolveError:
                failures += 1
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {pool.submit(one, i): i for i in range(n)}
            for fut, i in futures.items():
                try:
                    counts[i] = fut.result()
                except EigensolveError:
                    failures += 1
    if failures > 0.01 * n:
        raise EigensolveError(
            f"{failures} of {n} samples failed; report abandoned"
        )
    good = counts[counts >= 0]
    mean = float(good.mean()) if good.size else math.nan
    stderr = (
        float(good.std(ddof=1) / math.sqrt(good.size)) if good.size > 1 else 0.0
    )
    rhs = None
    if params.constants is not None:
        rhs = wegner_rhs(
            params.epsilon,
            params.grid.L,
            params.grid.d,
            params.b,
            params.constants,
            params.measure.density_sup,
            params.measure.omega_plus,
        )
    return WegnerReport(
        params=params,
        counts=counts,
        seeds=seeds,
        mean=mean,
        stderr=stderr,
        rhs_bound=rhs,
        excluded=failures,
    )


def sandwich_check(spectrum: Spectrum, E: float, eps: float) -> tuple[int, float]:
    """Window count versus the difference of shifted switch traces.

    lhs = #{eigenvalues in [E - eps, E + eps]}, rhs = Tr[rho(H - E + 2 eps)
    - rho(H - E - 2 eps)]; the scalar sandwich makes lhs <= rhs hold
    pointwise, checked here with tolerance 1e-9.
    """
    if spectrum.b < E + 3.0 * eps:
        raise ValueError(
            f"spectrum complete only below {spectrum.b}, need {E + 3.0 * eps}"
        )
    vals = spectrum.eigenvalues
    lhs = int(np.sum((vals >= E - eps) & (vals <= E + eps)))
    rhs = trace_rho(spectrum, E, eps, -2.0 * eps) - trace_rho(
        spectrum, E, eps, 2.0 * eps
    )
    if lhs > rhs + 1e-9:
        raise BoundViolationError(f"sandwich failed: {lhs} > {rhs}")
    return lhs, float(rhs)


def _theta_value(
    omega: OmegaSample,
    delta: float,
    E: float,
    eps: float,
    grid: GridSpec,
    shape: SingleSiteShape,
    magnetic: MagneticSpec | None,
    n: int,
    t: float,
) -> float:
    """Theta_n(t): switch trace of the configuration with sites 1..n-1
    shifted by delta and site n's radius set to t."""
    if not 1 <= n <= omega.radii.size:
        raise ValueError(f"site index {n} out of range")
    if not 0.0 <= t <= 0.5:
        raise ValueError(f"radius {t} outside [0, 1/2]")
    shifted = shift_all(omega, delta).radii
    radii = omega.radii.copy()
    radii[: n - 1] = shifted[: n - 1]
    radii[n - 1] = t
    config = OmegaSample(L=omega.L, d=omega.d, radii=radii)
    v = potential_on_grid(config, shape, grid)
    h = assemble_hamiltonian(grid, v, magnetic)
    return trace_rho(h, E, eps, 2.0 * eps)


@dataclass(frozen=True)
class TelescopeState:
    """Telescoping decomposition over single-site shifts, with receipts.

    Site n of the lexicographic enumeration (1-based) owns the
    intermediate configuration with sites 1..n-1 already shifted and site
    n free; Theta_n(t) is the switch trace of that configuration with
    site n's radius set to t.  theta_lo[n-1] and theta_hi[n-1] are
    Theta_n at the original and at the shifted radius.
    """

    omega: OmegaSample
    delta: float
    E: float
    eps: float
    b: float
    grid: GridSpec
    shape: SingleSiteShape
    magnetic: MagneticSpec | None
    theta_lo: np.ndarray = field(repr=False)
    theta_hi: np.ndarray = field(repr=False)
    chain_gaps: np.ndarray = field(repr=False)
    endpoint_gaps: tuple[float, float]
    sum_gap: float

    @property
    def n_sites(self) -> int:
        return self.omega.radii.size

    def theta(self, n: int, t: float) -> float:
        """Theta_n(t) for the 1-based site index n; fresh eigensolve."""
        return _theta_value(
            self.omega,
            self.delta,
            self.E,
            self.eps,
            self.grid,
            self.shape,
            self.magnetic,
            n,
            t,
        )


def telescope(
    omega: OmegaSample,
    delta: float,
    E: float,
    eps: float,
    b: float,
    grid: GridSpec,
    shape: SingleSiteShape,
    magnetic: MagneticSpec | None = None,
) -> TelescopeState:
    """Evaluate all Theta_n at both endpoints and verify the identities.

    Checked to tolerance 1e-8: the chaining identity
    Theta_n(omega_n) = Theta_{n-1}(omega_{n-1} + delta), the two endpoint
    identities tying Theta_1 and Theta_N to the unshifted and fully
    shifted configurations, and the collapsed total
    Theta_N(hi) - Theta_1(lo) = sum of per-site differences.
    """
    n_sites = omega.radii.size
    shifted = shift_all(omega, delta).radii
    theta_lo = np.empty(n_sites)
    theta_hi = np.empty(n_sites)
    for n in range(1, n_sites + 1):
        theta_lo[n - 1] = _theta_value(
            omega, delta, E, eps, grid, shape, magnetic, n, float(omega.radii[n - 1])
        )
        theta_hi[n - 1] = _theta_value(
            omega, delta, E, eps, grid, shape, magnetic, n, float(shifted[n - 1])
        )

    def switch_trace(config: OmegaSample) -> float:
        v = potential_on_grid(config, shape, grid)
        return trace_rho(assemble_hamiltonian(grid, v, magnetic), E, eps, 2.0 * eps)

    chain_gaps = np.abs(theta_lo[1:] - theta_hi[:-1])
    start_gap = abs(theta_lo[0] - switch_trace(omega))
    end_gap = abs(theta_hi[-1] - switch_trace(shift_all(omega, delta)))
    sum_gap = abs(
        (theta_hi[-1] - theta_lo[0]) - float(np.sum(theta_hi - theta_lo))
    )
    worst = max(
        chain_gaps.max() if chain_gaps.size else 0.0, start_gap, end_gap, sum_gap
    )
    if worst > _IDENTITY_TOL:
        raise BoundViolationError(
            f"telescoping identity violated by {worst:.3e}"
        )
    return TelescopeState(
        omega=omega,
        delta=delta,
        E=E,
        eps=eps,
        b=b,
        grid=grid,
        shape=shape,
        magnetic=magnetic,
        theta_lo=theta_lo,
        theta_hi=theta_hi,
        chain_gaps=chain_gaps,
        endpoint_gaps=(start_gap, end_gap),
        sum_gap=sum_gap,
    )


def averaging_lemma_check(
    theta_table: tuple[np.ndarray, np.ndarray],
    measure: MeasureSpec,
    delta: float,
) -> tuple[float, float]:
    """int [Theta(t + delta) - Theta(t)] dmu(t) against the closed bound
    ||nu||_inf * delta * [Theta(omega_plus + delta) - Theta(omega_minus)].

    ``theta_table`` tabulates a nondecreasing bounded Theta on a grid
    covering [omega_minus, omega_plus + delta]; between knots Theta is
    interpolated linearly, which keeps both sides exactly computable (the
    integrand is piecewise quadratic, integrated by Simpson's rule on each
    piece).  Raises BoundViolationError when the inequality fails beyond
    1e-8.
    """
    knots, values = (np.asarray(a, dtype=float) for a in theta_table)
    if knots.ndim != 1 or knots.shape != values.shape or knots.size < 2:
        raise ValueError("need matching 1-d knot and value arrays")
    if np.any(np.diff(knots) <= 0):
        raise ValueError("knots must be strictly increasing")
    if np.any(np.diff(values) < -1e-12):
        raise ValueError("Theta table is not nondecreasing")
    if not delta > 0:
        raise ValueError("delta must be positive")
    lo, hi = measure.omega_minus, measure.omega_plus
    if knots[0] > lo + 1e-12 or knots[-1] < hi + delta - 1e-12:
        raise ValueError(
            f"table [{knots[0]}, {knots[-1]}] does not cover "
            f"[{lo}, {hi + delta}]"
        )

    def theta(x):
        return np.interp(x, knots, values)

    def integrand(x):
        return (theta(x + delta) - theta(x)) * measure.pdf(x)

    nodes = {lo, hi}
    for k in knots:
        if lo < k < hi:
            nodes.add(float(k))
        if lo < k - delta < hi:
            nodes.add(float(k - delta))
    nodes = np.array(sorted(nodes))
    lhs = 0.0
    for a, c in zip(nodes[:-1], nodes[1:]):
        m = 0.5 * (a + c)
        lhs += (c - a) / 6.0 * float(
            integrand(a) + 4.0 * integrand(m) + integrand(c)
        )
    rhs = measure.density_sup * delta * float(theta(hi + delta) - theta(lo))
    if lhs > rhs + 1e-8:
        raise BoundViolationError(f"averaging lemma failed: {lhs} > {rhs}")
    return lhs, rhs


def theta_spread_bound(
    theta_low: float, theta_high: float, eps: float, d: int, b: float
) -> float:
    """Checks theta_high - theta_low <= (K1 e^b + 2^d K2) |ln eps|^d and
    returns the bound; requires 0 < eps <= 1/2."""
    if not 0.0 < eps <= 0.5:
        raise ValueError(f"eps must lie in (0, 1/2], got {eps}")
    k1 = 2.0 * 32**d * math.factorial(d + 1)
    k2 = float(32**d)
    bound = (k1 * math.exp(b) + 2**d * k2) * abs(math.log(eps)) ** d
    if theta_high - theta_low > bound:
        raise BoundViolationError(
            f"switch-trace spread {theta_high - theta_low} exceeds {bound}"
        )
    return bound


@dataclass(frozen=True)
class IdsPoint:
    """Empirical integrated density of states at one (L, E)."""

    L: int
    E: float
    mean: float
    stderr: float


def ids_estimate(
    L_list,
    E_grid,
    measure: MeasureSpec,
    shape: SingleSiteShape,
    n_h: int,
    n_samples: int,
    master_seed: int,
    d: int = 1,
    magnetic: MagneticSpec | None = None,
) -> list[IdsPoint]:
    """Volume-normalized counting function, Monte Carlo averaged.

    The same derived seeds are reused for every L, so per-L curves share
    their randomness and can be compared pointwise.
    """
    E_grid = [float(e) for e in E_grid]
    seeds = [derive_sample_seed(master_seed, s) for s in range(1, n_samples + 1)]
    out = []
    for L in L_list:
        grid = GridSpec(d=d, L=int(L), n_h=n_h)
        vol = float(L) ** d
        samples = np.empty((n_samples, len(E_grid)))
        for i, seed in enumerate(seeds):
            omega = sample_omega(measure, int(L), seed, d)
            v = potential_on_grid(omega, shape, grid)
            h = assemble_hamiltonian(grid, v, magnetic)
            samples[i] = [count_below(h, e) / vol for e in E_grid]
        for j, e in enumerate(E_grid):
            col = samples[:, j]
            err = (
                float(col.std(ddof=1) / math.sqrt(n_samples))
                if n_samples > 1
                else 0.0
            )
            out.append(IdsPoint(L=int(L), E=e, mean=float(col.mean()), stderr=err))
    return out


@dataclass(frozen=True)
class HoelderFit:
    """Slope of log increments against log eps around one energy."""

    slope: float | None
    below_resolution: bool
    eps_values: tuple[float, ...]
    increments: tuple[float, ...]


def hoelder_fit(table: list[IdsPoint], E0: float) -> HoelderFit:
    """Regress log(N(E0 + eps) - N(E0 - eps)) against log eps.

    Uses the largest L present in the table; energies must come in pairs
    symmetric around E0 spanning at least a decade of eps.  All-zero
    increments are reported as below resolution instead of an error.
    """
    L = max(p.L for p in table)
    at_L = {p.E: p.mean for p in table if p.L == L}
    eps_vals = []
    incs = []
    for e in sorted(at_L):
        eps = E0 - e
        if eps <= 0:
            continue
        partner = None
        for e2 in at_L:
            if abs((e2 - E0) - eps) < 1e-12:
                partner = e2
                break
        if partner is None:
            continue
        eps_vals.append(eps)
        incs.append(at_L[partner] - at_L[e])
    if len(eps_vals) < 2 or max(eps_vals) < 10.0 * min(eps_vals) - 1e-12:
        raise ValueError("need symmetric energy pairs spanning a decade of eps")
    positive = [(e, i) for e, i in zip(eps_vals, incs) if i > 0]
    if len(positive) < 2:
        return HoelderFit(
            slope=None,
            below_resolution=True,
            eps_values=tuple(eps_vals),
            increments=tuple(incs),
        )
    le = np.log([e for e, _ in positive])
    li = np.log([i for _, i in positive])
    slope = float(np.polyfit(le, li, 1)[0])
    return HoelderFit(
        slope=slope,
        below_resolution=False,
        eps_values=tuple(eps_vals),
        increments=tuple(incs),
    )
