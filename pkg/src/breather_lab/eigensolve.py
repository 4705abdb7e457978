"""Spectral computations on assembled Hamiltonians.

Four groups of tools live here: exact eigenvalue counting below a shift
through matrix inertia (Sylvester's law, with a tridiagonal Sturm
recurrence in d = 1 and a Bunch-Kaufman factorization otherwise), lowest
eigenpairs with certified completeness below a cutoff, small dense matrix
exponentials, and the smooth switch function rho used to sandwich spectral
window counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid_operator import HamiltonianMatrix

# Above this dimension eigen_lowest switches from a full dense solve to
# shift-invert Lanczos with inertia-certified completeness.
DENSE_LIMIT = 2000
# Dense-path guard for matrix exponentials.
SEMIGROUP_LIMIT = 4000

# Relative shift nudge for inertia counting; doubled on factorization
# breakdown, up to three retries.
_ETA = 1e-12

_ORTHO_TOL = 1e-9
_RESIDUAL_TOL = 1e-8


class EigensolveError(RuntimeError):
    """Raised when an eigensolver fails; may carry partial results."""

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial


@dataclass(frozen=True)
class Spectrum:
    """Sorted eigenvalues with optional orthonormal eigenvectors.

    Every eigenvalue <= ``b`` is guaranteed present (counting
    multiplicities); ``b`` may be +inf when the full spectrum is stored.
    Eigenvectors, when present, cover exactly the stored eigenvalues that
    are <= ``b``.
    """

    eigenvalues: np.ndarray = field(repr=False)
    b: float
    eigenvectors: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        vals = np.asarray(self.eigenvalues, dtype=float)
        object.__setattr__(self, "eigenvalues", vals)
        if vals.ndim != 1:
            raise ValueError("eigenvalues must form a 1-d array")
        if vals.size > 1 and np.any(np.diff(vals) < 0):
            raise ValueError("eigenvalues must be nondecreasing")

    def count_below(self, lam: float) -> int:
        """#{eigenvalues <= lam}; only valid for lam <= b."""
        if lam > self.b:
            raise ValueError(f"count at {lam} exceeds completeness cutoff {self.b}")
        return int(np.searchsorted(self.eigenvalues, lam, side="right"))


def _as_dense_or_matrix(H):
    """Normalize input: HamiltonianMatrix passes through, arrays are squared up."""
    if isinstance(H, HamiltonianMatrix):
        return H
    if sp.issparse(H):
        return H.toarray()
    arr = np.asarray(H)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {arr.shape}")
    return arr


def _sturm_count(diag: np.ndarray, off: np.ndarray, shift: float) -> int | None:
    """Negative-pivot count of the LDL^T recurrence for a Hermitian
    tridiagonal matrix minus shift; None signals a zero pivot."""
    off2 = np.abs(off) ** 2
    d = diag[0] - shift
    if d == 0.0:
        return None
    count = 1 if d < 0.0 else 0
    for i in range(1, diag.size):
        d = (diag[i] - shift) - off2[i - 1] / d
        if d == 0.0:
            return None
        if d < 0.0:
            count += 1
    return count


def _ldl_negative_count(arr: np.ndarray, shift: float) -> int | None:
    """Negative eigenvalue count of arr - shift*I from a Bunch-Kaufman
    factorization; None signals a singular diagonal block."""
    a = arr - shift * np.identity(arr.shape[0], dtype=arr.dtype)
    if a.shape[0] == 0:
        return 0
    _, d, _ = scipy.linalg.ldl(a, hermitian=True)
    count = 0
    i = 0
    n = a.shape[0]
    while i < n:
        if i + 1 < n and (d[i, i + 1] != 0 or d[i + 1, i] != 0):
            p, q = d[i, i].real, d[i + 1, i + 1].real
            c2 = max(abs(d[i, i + 1]), abs(d[i + 1, i])) ** 2
            # eigenvalues of the Hermitian 2x2 block [[p, c], [conj(c), q]]
            mid = 0.5 * (p + q)
            rad = np.hypot(0.5 * (p - q), np.sqrt(c2))
            for lam in (mid - rad, mid + rad):
                if lam == 0.0:
                    return None
                if lam < 0.0:
                    count += 1
            i += 2
        else:
            p = d[i, i].real
            if p == 0.0:
                return None
            if p < 0.0:
                count += 1
            i += 1
    return count


def count_below(H, sigma: float, inclusive: bool = True) -> int:
    """#{eigenvalues of H <= sigma} (or < sigma when ``inclusive`` is false),
    computed exactly from matrix inertia, no eigenvectors involved.

    The shift is nudged by eta*(1+|sigma|), eta = 1e-12, upward for the
    inclusive count and downward for the strict one, so that eigenvalues
    lying exactly at sigma land on the intended side; on factorization
    breakdown the nudge is doubled, up to three retries.
    """
    if not np.isfinite(sigma):
        raise ValueError("shift must be finite")
    H = _as_dense_or_matrix(H)
    tridiag = None
    if isinstance(H, HamiltonianMatrix):
        if H.grid.d == 1:
            tridiag = H.tridiagonal()
        else:
            H = H.toarray()

    eta = _ETA
    for _ in range(4):
        # relative nudge scaled by |sigma| so it works on either sign
        nudge = eta * (1.0 + abs(sigma))
        shift = sigma + nudge if inclusive else sigma - nudge
        if tridiag is not None:
            count = _sturm_count(tridiag[0], tridiag[1], shift)
        else:
            count = _ldl_negative_count(H, shift)
        if count is not None:
            return count
        eta *= 2.0
    raise EigensolveError(
        f"inertia factorization kept breaking down near shift {sigma}"
    )


def trace_spectral_projector(H, E: float, eps: float) -> int:
    """#{eigenvalues in the closed window [E - eps, E + eps]}."""
    if not eps > 0:
        raise ValueError("window half-width must be positive")
    return count_below(H, E + eps, inclusive=True) - count_below(
        H, E - eps, inclusive=False
    )


def _validate_pairs(mat, vals: np.ndarray, vecs: np.ndarray):
    if vecs.shape[1] == 0:
        return
    gram = vecs.conj().T @ vecs
    ortho = np.abs(gram - np.identity(vecs.shape[1])).max()
    if ortho > _ORTHO_TOL:
        raise EigensolveError(f"eigenvector orthonormality defect {ortho:.3e}")
    resid = mat @ vecs - vecs * vals
    worst = 0.0
    for k in range(vecs.shape[1]):
        r = np.linalg.norm(resid[:, k]) / (1.0 + abs(vals[k]))
        worst = max(worst, r)
    if worst > _RESIDUAL_TOL:
        raise EigensolveError(f"eigenpair residual {worst:.3e}")


def eigen_lowest(H, b: float) -> Spectrum:
    """All eigenvalues <= b, with eigenvectors, completeness certified.

    For dimensions up to DENSE_LIMIT a full dense solve is used and every
    eigenvalue is returned (cutoff +inf), with eigenvectors kept for the
    eigenvalues <= b.  Above that, shift-invert Lanczos computes the k
    lowest pairs where k comes from inertia counting, which certifies that
    nothing below b was missed.
    """
    H = _as_dense_or_matrix(H)
    if isinstance(H, HamiltonianMatrix):
        mat = H.mat
        n = H.n
    else:
        mat = H
        n = mat.shape[0]
    if n == 0:
        return Spectrum(eigenvalues=np.empty(0), b=np.inf,
                        eigenvectors=np.empty((0, 0)))

    if math.isfinite(b):
        k_below = count_below(H, b)
    else:
        k_below = n  # full spectrum requested; dense path below
    if n <= DENSE_LIMIT or k_below >= n - 1:
        dense = mat.toarray() if sp.issparse(mat) else np.asarray(mat)
        vals, vecs = scipy.linalg.eigh(dense)
        keep = vals <= b
        _validate_pairs(dense, vals[keep], vecs[:, keep])
        spectrum = Spectrum(eigenvalues=vals, b=np.inf, eigenvectors=vecs[:, keep])
    else:
        if k_below == 0:
            return Spectrum(eigenvalues=np.empty(0), b=float(b),
                            eigenvectors=np.empty((n, 0)))
        sparse = mat.tocsc() if sp.issparse(mat) else sp.csc_matrix(mat)
        try:
            # sigma below the spectrum (H >= 0), so the k eigenvalues
            # nearest the shift are exactly the k lowest
            vals, vecs = spla.eigsh(sparse, k=k_below, sigma=-1.0, which="LM")
        except spla.ArpackNoConvergence as exc:
            partial = None
            if exc.eigenvalues is not None and exc.eigenvalues.size:
                order = np.argsort(exc.eigenvalues)
                partial = Spectrum(
                    eigenvalues=exc.eigenvalues[order],
                    b=-np.inf,
                    eigenvectors=exc.eigenvectors[:, order],
                )
            raise EigensolveError(
                f"Lanczos failed to converge for {k_below} pairs", partial=partial
            ) from exc
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
        _validate_pairs(sparse, vals, vecs)
        spectrum = Spectrum(eigenvalues=vals, b=float(b), eigenvectors=vecs)

    stored = spectrum.count_below(min(b, spectrum.b))
    if stored != k_below:
        raise EigensolveError(
            f"completeness check failed: {stored} stored vs {k_below} by inertia"
        )
    return spectrum


def semigroup(H, t: float) -> np.ndarray:
    """exp(-t H) as a dense matrix, via full Hermitian eigendecomposition."""
    if not t > 0:
        raise ValueError("time must be positive")
    H = _as_dense_or_matrix(H)
    if isinstance(H, HamiltonianMatrix):
        if H.n > SEMIGROUP_LIMIT:
            raise ValueError(
                f"semigroup guard: dimension {H.n} exceeds {SEMIGROUP_LIMIT}"
            )
        dense = H.toarray()
    else:
        if H.shape[0] > SEMIGROUP_LIMIT:
            raise ValueError(
                f"semigroup guard: dimension {H.shape[0]} exceeds {SEMIGROUP_LIMIT}"
            )
        dense = H
    vals, vecs = scipy.linalg.eigh(dense)
    out = (vecs * np.exp(-t * vals)) @ vecs.conj().T
    return 0.5 * (out + out.conj().T)


@dataclass(frozen=True)
class SmoothSwitch:
    """The C^1 switch rho: -1 on (-inf, -eps], 0 on [eps, inf), cubic
    smoothstep in between; max slope 3/(4 eps) <= 1/eps, total rise 1."""

    epsilon: float

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("switch width must be positive")


def smooth_switch_eval(s: SmoothSwitch, x):
    u = np.clip((np.asarray(x, dtype=float) + s.epsilon) / (2.0 * s.epsilon), 0.0, 1.0)
    return -1.0 + u * u * (3.0 - 2.0 * u)


def smooth_switch_deriv(s: SmoothSwitch, x):
    u = np.clip((np.asarray(x, dtype=float) + s.epsilon) / (2.0 * s.epsilon), 0.0, 1.0)
    return 3.0 * u * (1.0 - u) / s.epsilon


def trace_rho(spectrum, E: float, eps: float, offset: float) -> float:
    """Tr rho(H - E - offset) with the width-eps switch.

    ``spectrum`` may be a Spectrum or anything eigen_lowest accepts; the
    eigenvalues must be complete below E + offset + eps (all higher ones
    contribute exactly 0).
    """
    if not isinstance(spectrum, Spectrum):
        spectrum = eigen_lowest(spectrum, E + offset + eps)
    if spectrum.b < E + offset + eps:
        raise ValueError(
            f"spectrum complete only below {spectrum.b}, need {E + offset + eps}"
        )
    s = SmoothSwitch(eps)
    x = spectrum.eigenvalues - E - offset
    x = x[x < eps]
    if x.size == 0:
        return 0.0
    return float(np.sum(smooth_switch_eval(s, x)))


def spectrum_csv(spectrum: Spectrum) -> str:
    """CSV serialization: index and eigenvalue columns."""
    lines = ["index,eigenvalue"]
    for i, lam in enumerate(spectrum.eigenvalues):
        lines.append(f"{i},{float(lam)!r}")
    return "\n".join(lines) + "\n"
