"""Spectral shift functions and the bound machinery around them.

For a finite-volume pair H0, H1 the spectral shift function is the
difference of eigenvalue counting functions,

    xi(lam) = N0(lam) - N1(lam),    N_j(lam) = #{eigenvalues of H_j <= lam},

which in finite dimension is the unique function satisfying Krein's trace
identity Tr[g(H1) - g(H0)] = int xi g' for smooth g.  The module also
covers the Weyl-type lower bound on Dirichlet eigenvalues, singular values
of the semigroup difference e^{-H1} - e^{-H0} with their stretched-
exponential decay bound, the convex functions F_t with their Legendre
transforms G_t, and the closed-form bound on trace differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.integrate
import scipy.optimize

from .eigensolve import Spectrum, semigroup


class EigenvalueCollisionError(ValueError):
    """An evaluation point coincides with an eigenvalue; counting is
    convention-dependent there, so the caller should skip the point."""


@dataclass(frozen=True)
class StepFunction:
    """Right-continuous integer step function with compactly many jumps.

    ``values`` has one more entry than ``breakpoints``; values[k] is the
    value on [breakpoints[k-1], breakpoints[k]), values[0] the value left
    of all breakpoints.  Evaluation above ``cutoff`` is refused, since
    there the underlying counting data is incomplete.
    """

    breakpoints: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    cutoff: float = math.inf

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        vals = np.asarray(self.values)
        if not np.issubdtype(vals.dtype, np.integer):
            raise ValueError("step function values must be integers")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)
        if bp.size + 1 != vals.size:
            raise ValueError("need exactly one more value than breakpoints")
        if bp.size > 1 and np.any(np.diff(bp) < 0):
            raise ValueError("breakpoints must be sorted")

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=float)
        if np.any(lam > self.cutoff):
            raise ValueError(
                f"evaluation above the completeness cutoff {self.cutoff}"
            )
        idx = np.searchsorted(self.breakpoints, lam, side="right")
        out = self.values[idx]
        return int(out) if out.ndim == 0 else out

    def pieces(self, upto: float):
        """(left, right, value) triples covering (-inf, upto], finite parts
        clipped to upto.  The leading piece starts at -inf."""
        if upto > self.cutoff:
            raise ValueError(
                f"evaluation above the completeness cutoff {self.cutoff}"
            )
        edges = [-math.inf, *self.breakpoints.tolist(), math.inf]
        out = []
        for k, v in enumerate(self.values):
            left, right = edges[k], min(edges[k + 1], upto)
            if right <= left:
                break
            out.append((left, right, int(v)))
        return out


def weyl_lower_bound(n: int, volume: float, d: int) -> float:
    """(2 pi d / e) * (n / volume)^(2/d), a lower bound on the n-th
    Dirichlet eigenvalue of a nonnegative Schrodinger operator on a domain
    of the given volume."""
    if n < 1:
        raise ValueError("eigenvalue index must be >= 1")
    if not volume > 0:
        raise ValueError("volume must be positive")
    return 2.0 * math.pi * d / math.e * (n / volume) ** (2.0 / d)


def _counting(evals: np.ndarray, lam: np.ndarray) -> np.ndarray:
    return np.searchsorted(evals, lam, side="right")


def spectral_shift(spec0: Spectrum, spec1: Spectrum) -> StepFunction:
    """xi = N0 - N1 as a step function, valid below both cutoffs."""
    cutoff = min(spec0.b, spec1.b)
    e0 = spec0.eigenvalues[spec0.eigenvalues <= cutoff]
    e1 = spec1.eigenvalues[spec1.eigenvalues <= cutoff]
    bp = np.unique(np.concatenate([e0, e1]))
    vals = np.empty(bp.size + 1, dtype=np.int64)
    vals[0] = 0
    vals[1:] = _counting(e0, bp) - _counting(e1, bp)
    return StepFunction(breakpoints=bp, values=vals, cutoff=cutoff)


def krein_check(H0, H1, g, g_prime, b: float) -> tuple[float, float, float]:
    """Both sides of Krein's identity and their gap.

    ``g`` must be smooth with g' supported in (-inf, b]; the left side is
    evaluated through the full spectra of the pair, the right side by
    adaptive quadrature of g' against the step function xi, piece by
    piece.  Returns (lhs, rhs, |lhs - rhs|).
    """
    from .eigensolve import eigen_lowest

    spec0 = eigen_lowest(H0, math.inf)
    spec1 = eigen_lowest(H1, math.inf)
    lhs = float(np.sum(g(spec1.eigenvalues)) - np.sum(g(spec0.eigenvalues)))
    xi = spectral_shift(spec0, spec1)
    upto = max(b, float(xi.breakpoints[-1]) if xi.breakpoints.size else b)
    rhs = 0.0
    for left, right, v in xi.pieces(upto):
        if v == 0 or right <= left:
            continue
        integral, _ = scipy.integrate.quad(
            g_prime, left, right, epsabs=1e-12, epsrel=1e-12, limit=200
        )
        rhs += v * integral
    return lhs, rhs, abs(lhs - rhs)


def invariance_check(spec0: Spectrum, spec1: Spectrum, lam: float) -> tuple[int, int]:
    """xi at lam versus the exponentiated pair at e^{-lam}.

    The map x -> e^{-x} is strictly decreasing, so the spectral shift
    function of the pair (e^{-H1}, e^{-H0}) evaluated at e^{-lam} equals
    -xi(lam).  Both sides are computed by direct counting; lam must not be
    an eigenvalue of either operator.
    """
    cutoff = min(spec0.b, spec1.b)
    if lam > cutoff:
        raise ValueError(f"evaluation above the completeness cutoff {cutoff}")
    e0, e1 = spec0.eigenvalues, spec1.eigenvalues
    if e0.size != e1.size:
        # the exponentiated side counts from the top of the spectrum, so
        # truncated lists of different lengths would skew it
        raise ValueError("invariance check needs full spectra of equal length")
    if np.any(e0 == lam) or np.any(e1 == lam):
        raise EigenvalueCollisionError(f"{lam} is an eigenvalue of the pair")
    lhs = int(_counting(e0, np.asarray(lam)) - _counting(e1, np.asarray(lam)))
    s = math.exp(-lam)
    x0, x1 = np.exp(-e0), np.exp(-e1)
    if np.any(x0 == s) or np.any(x1 == s):
        raise EigenvalueCollisionError(
            f"exp(-{lam}) collides with an exponentiated eigenvalue"
        )
    n_exp0 = int(np.sum(x0 <= s))
    n_exp1 = int(np.sum(x1 <= s))
    rhs = -(n_exp0 - n_exp1)
    return lhs, rhs


@dataclass(frozen=True)
class SingularValueList:
    """Singular values in nonincreasing order, full length."""

    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        if vals.size > 1 and np.any(np.diff(vals) > 0):
            raise ValueError("singular values must be nonincreasing")
        if vals.size and vals[-1] < -1e-14:
            raise ValueError("singular values must be nonnegative")

    def __len__(self):
        return self.values.size

    def mu(self, n: int) -> float:
        """1-based access matching the usual enumeration mu_1 >= mu_2 ..."""
        return float(self.values[n - 1])


def veff_singular_values(H0, H1) -> SingularValueList:
    """Singular values of e^{-H1} - e^{-H0}, descending."""
    diff = semigroup(H1, 1.0) - semigroup(H0, 1.0)
    return SingularValueList(values=np.linalg.svd(diff, compute_uv=False))


def singular_bound(n: int, d: int) -> float:
    """((2d)^(1/4) + 1) * exp(-n^(1/d) / 16), valid for n > 4^d."""
    if n <= 4**d:
        raise ValueError(f"bound only asserted for n > {4 ** d} (d = {d})")
    return ((2.0 * d) ** 0.25 + 1.0) * math.exp(-(n ** (1.0 / d)) / 16.0)


def ft_eval(t: float, d: int, x: float) -> float:
    """F_t(x) = int_0^x (exp(t y^(1/d)) - 1) dy; closed form for d = 1,
    adaptive quadrature at absolute tolerance 1e-10 otherwise."""
    if not t > 0:
        raise ValueError("t must be positive")
    if x < 0:
        raise ValueError("F_t is only defined for x >= 0")
    if x == 0.0:
        return 0.0
    if d == 1:
        return (math.expm1(t * x)) / t - x
    val, _ = scipy.integrate.quad(
        lambda y: math.expm1(t * y ** (1.0 / d)), 0.0, x, epsabs=1e-10, limit=200
    )
    return val


def ssf_ft_integral(xi: StepFunction, T: float, t: float, d: int) -> float:
    """int_{-inf}^T F_t(|xi|), an exact piecewise sum over the breakpoints."""
    total = 0.0
    for left, right, v in xi.pieces(T):
        if v == 0:
            continue
        if not math.isfinite(left):
            raise ValueError("xi must vanish on the far left")
        total += (right - left) * ft_eval(t, d, abs(v))
    return total


def trace_diff_bound(b: float, sup_gprime: float, l1_gprime: float, d: int) -> float:
    """K1 e^b + K2 ln(1 + sup|g'|)^d ||g'||_1 with K1 = 2 * 32^d * (d+1)!,
    K2 = 32^d; bounds |Tr[g(H1) - g(H0)]| for g' supported in (-inf, b]."""
    if sup_gprime < 0 or l1_gprime < 0:
        raise ValueError("norms must be nonnegative")
    k1 = 2.0 * 32**d * math.factorial(d + 1)
    k2 = float(32**d)
    return k1 * math.exp(b) + k2 * math.log(1.0 + sup_gprime) ** d * l1_gprime


def legendre_gt(t: float, d: int, y: float) -> float:
    """G_t(y) = sup_{x >= 0} (x y - F_t(x)) by grid search plus bounded
    refinement.

    The objective's derivative y - F_t'(x) is negative for
    x > x* = (ln(1+y)/t)^d, so the sup over [0, x*] is global; the grid
    stage brackets the maximizer and a bounded scalar minimization
    refines it.
    """
    if y < 0:
        raise ValueError("G_t is only used for y >= 0")
    if y == 0.0:
        return 0.0
    x_star = (math.log1p(y) / t) ** d
    x_max = 1.125 * x_star
    grid = np.linspace(0.0, x_max, 65)
    obj = np.array([x * y - ft_eval(t, d, x) for x in grid])
    k = int(np.argmax(obj))
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, grid.size - 1)]
    res = scipy.optimize.minimize_scalar(
        lambda x: -(x * y - ft_eval(t, d, x)),
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": 1e-12},
    )
    return max(0.0, float(obj[k]), -float(res.fun))


def hs_majorization_sides(
    exp_xi: StepFunction, mu: SingularValueList, t: float, d: int
) -> tuple[float, float]:
    """Both sides of the singular-value majorization bound.

    Left: int F_t(|xi_exp|) over the whole line (xi_exp is the spectral
    shift function of the exponentiated pair and has compact support).
    Right: sum_n mu_n * (F_t(n) - F_t(n-1)), using that F_t is convex with
    F_t(0) = 0.
    """
    if exp_xi.breakpoints.size == 0:
        return 0.0, 0.0
    lhs = ssf_ft_integral(exp_xi, float(exp_xi.breakpoints[-1]), t, d)
    rhs = 0.0
    for n in range(1, len(mu) + 1):
        step = ft_eval(t, d, float(n)) - ft_eval(t, d, float(n - 1))
        rhs += mu.mu(n) * step
    return lhs, rhs
