"""Empirical unique-continuation constants and eigenvalue lifting.

The quantity of interest is the best constant c such that

    P W P >= c P     (quadratic-form sense),

where P projects onto the eigenspaces with eigenvalue <= b and W is the
indicator of an equidistributed union of small balls.  Restricted to the
range of P this is exactly the smallest eigenvalue of a Gram matrix, so
the constant is computable without any operator inequalities.  Sampled
constants as a function of the ball radius are then fitted with the
envelope law c(r) >= kappa * r^(1/M), and the fitted pair feeds the
eigenvalue-lifting margin lambda_i(omega + delta) - lambda_i(omega) -
kappa * (delta/2)^(1/M).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .breather_field import (
    OmegaSample,
    SingleSiteShape,
    increment_centers,
    potential_on_grid,
    shift_all,
    w_indicator,
)
from .eigensolve import eigen_lowest
from .grid_operator import GridSpec, MagneticSpec, assemble_hamiltonian

# The fitted envelope is shrunk by this relative cushion so the sample
# attaining the minimum stays strictly feasible under roundoff.
_ENVELOPE_CUSHION = 1e-6


@dataclass(frozen=True)
class UcpConstants:
    """Fitted envelope constants: observed c >= kappa * delta^(1/M)."""

    kappa: float
    M: float
    fit_window: tuple[float, ...]
    residual: float
    b: float

    def __post_init__(self):
        if not 0.0 < self.kappa <= 1.0:
            raise ValueError(f"kappa must lie in (0, 1], got {self.kappa}")
        if not self.M >= 1.0:
            raise ValueError(f"M must be >= 1, got {self.M}")

    def envelope(self, delta: float) -> float:
        return self.kappa * delta ** (1.0 / self.M)


def ucp_constant(H, b: float, w: np.ndarray) -> float | None:
    """Smallest eigenvalue of the Gram matrix of the <= b eigenvectors
    against the weight w; None when no eigenvalue lies at or below b.

    With eigenvectors orthonormal in the plain coordinate inner product,
    the h^d quadrature weights of the continuum pairing cancel between
    numerator and normalization, so the Gram matrix is simply
    Q* diag(w) Q.
    """
    w = np.asarray(w, dtype=float)
    if not np.all((w == 0.0) | (w == 1.0)):
        raise ValueError("weight must be a 0/1 indicator vector")
    spectrum = eigen_lowest(H, b)
    k = int(np.searchsorted(spectrum.eigenvalues, b, side="right"))
    if k == 0:
        return None
    q = spectrum.eigenvectors[:, :k]
    if w.shape != (q.shape[0],):
        raise ValueError(f"weight has shape {w.shape}, expected ({q.shape[0]},)")
    gram = q.conj().T @ (w[:, None] * q)
    vals = np.linalg.eigvalsh(gram)
    return float(vals[0])


def fit_ucp_exponents(samples, b: float) -> UcpConstants:
    """Least-squares power-law fit of observed constants, then clamps.

    ``samples`` is an iterable of (delta, observed constant) pairs with at
    least three distinct delta values and positive constants.  The fit
    regresses log c against log delta on the per-delta minima, clamps M up
    to 1 and kappa down to 1, and finally shrinks kappa so that every
    input sample satisfies c >= kappa * delta^(1/M).
    """
    pairs = [(float(d), float(c)) for d, c in samples]
    if any(c <= 0.0 for _, c in pairs):
        raise ValueError("observed constants must be positive")
    per_delta: dict[float, float] = {}
    for d, c in pairs:
        per_delta[d] = min(c, per_delta.get(d, math.inf))
    if len(per_delta) < 3:
        raise ValueError(
            f"need at least 3 distinct delta values, got {len(per_delta)}"
        )
    deltas = np.array(sorted(per_delta))
    minima = np.array([per_delta[d] for d in deltas])
    slope, intercept = np.polyfit(np.log(deltas), np.log(minima), 1)

    if slope <= 0.0:
        m_fit = 1.0
    else:
        m_fit = max(1.0, 1.0 / slope)
    kappa = min(1.0, math.exp(intercept))
    shrink = min(c / (kappa * d ** (1.0 / m_fit)) for d, c in pairs)
    if shrink < 1.0:
        kappa *= shrink
    kappa *= 1.0 - _ENVELOPE_CUSHION
    kappa = min(kappa, 1.0)

    model = np.log(kappa) + np.log(deltas) / m_fit
    residual = float(np.sqrt(np.mean((np.log(minima) - model) ** 2)))
    return UcpConstants(
        kappa=kappa,
        M=m_fit,
        fit_window=tuple(float(d) for d in deltas),
        residual=residual,
        b=float(b),
    )


@dataclass(frozen=True)
class LiftingRecord:
    """Per-eigenvalue outcome of a lifting check."""

    index: int
    lam_before: float
    lam_after: float
    monotonicity_margin: float
    lifting_margin: float


def lifting_check(
    omega: OmegaSample,
    delta: float,
    constants: UcpConstants,
    b: float,
    grid: GridSpec,
    shape: SingleSiteShape,
    magnetic: MagneticSpec | None = None,
) -> list[LiftingRecord]:
    """Margins of the shift inequality for every eigenvalue <= b - 1.

    For each index i with lambda_i(omega) <= b - 1 the report contains the
    plain monotonicity margin lambda_i(omega + delta) - lambda_i(omega)
    and the lifting margin, which additionally subtracts the envelope
    value kappa * (delta/2)^(1/M).  The perturbation is bounded by 1, so
    all these eigenvalues of the shifted operator stay <= b and index
    alignment between the two spectra is safe.
    """
    v0 = potential_on_grid(omega, shape, grid)
    v1 = potential_on_grid(shift_all(omega, delta), shape, grid)
    spec0 = eigen_lowest(assemble_hamiltonian(grid, v0, magnetic), b)
    spec1 = eigen_lowest(assemble_hamiltonian(grid, v1, magnetic), b)
    lift = constants.envelope(0.5 * delta) if delta > 0 else 0.0
    records = []
    for i, lam0 in enumerate(spec0.eigenvalues):
        if lam0 > b - 1.0:
            break
        lam1 = float(spec1.eigenvalues[i])
        rise = lam1 - float(lam0)
        records.append(
            LiftingRecord(
                index=i,
                lam_before=float(lam0),
                lam_after=lam1,
                monotonicity_margin=rise,
                lifting_margin=rise - lift,
            )
        )
    return records
