"""Dense complex linear algebra used by the rest of the package.

Every positivity decision and rank truncation in the toolkit goes through
:func:`hermitian_eig`, a cyclic Jacobi eigensolver for complex Hermitian
matrices. Tolerances are collected in :class:`TolerancePolicy` and are always
relative to ``max(1, norm)`` of the matrix being tested.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DimensionMismatch, NoConvergence, NotHermitian, NotPSD

MAX_SWEEPS = 100
_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class TolerancePolicy:
    hermiticity_tol: float = 1e-10
    psd_tol: float = 1e-9
    rank_cutoff: float = 1e-9
    residual_tol: float = 1e-8

    def __post_init__(self):
        for name in ("hermiticity_tol", "psd_tol", "rank_cutoff", "residual_tol"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be strictly positive, got {value!r}")

    def replace(self, **changes) -> "TolerancePolicy":
        fields = {
            "hermiticity_tol": self.hermiticity_tol,
            "psd_tol": self.psd_tol,
            "rank_cutoff": self.rank_cutoff,
            "residual_tol": self.residual_tol,
        }
        fields.update(changes)
        return TolerancePolicy(**fields)


DEFAULT_TOL = TolerancePolicy()


@dataclass(frozen=True, eq=False)
class EigenResult:
    eigenvalues: np.ndarray
    vectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.vectors
        return (v * self.eigenvalues) @ v.conj().T


def as_matrix(x, copy: bool = True) -> np.ndarray:
    """Coerce ``x`` into a finite 2-D complex128 array."""
    m = np.array(x, dtype=np.complex128, copy=copy)
    if m.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix contains NaN or Inf entries")
    return m


def scale_of(m: np.ndarray) -> float:
    return max(1.0, float(np.linalg.norm(m)))


def hermiticity_error(m: np.ndarray) -> float:
    return float(np.linalg.norm(m - m.conj().T))


def is_hermitian(m: np.ndarray, tol: TolerancePolicy = DEFAULT_TOL) -> bool:
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    return hermiticity_error(m) <= tol.hermiticity_tol * scale_of(m)


def _require_hermitian(m: np.ndarray, tol: TolerancePolicy) -> np.ndarray:
    if m.shape[0] != m.shape[1]:
        raise NotHermitian(f"matrix is not square: {m.shape}")
    err = hermiticity_error(m)
    if err > tol.hermiticity_tol * scale_of(m):
        raise NotHermitian(f"‖M − M*‖ = {err:.3e} exceeds tolerance")
    return 0.5 * (m + m.conj().T)


@lru_cache(maxsize=64)
def _round_robin(n: int) -> tuple[tuple[np.ndarray, np.ndarray], ...]:
    # Circle-method schedule: every round is a set of disjoint pivot pairs and
    # one sweep visits each pair (p, q), p < q, exactly once.
    players = list(range(n + (n % 2)))
    size = len(players)
    rounds = []
    for _ in range(size - 1):
        p_idx, q_idx = [], []
        for i in range(size // 2):
            p, q = players[i], players[size - 1 - i]
            if p >= n or q >= n:
                continue
            p_idx.append(min(p, q))
            q_idx.append(max(p, q))
        if p_idx:
            rounds.append((np.array(p_idx), np.array(q_idx)))
        players = [players[0], players[-1]] + players[1:-1]
    return tuple(rounds)


def _off_norm(a: np.ndarray) -> float:
    off = a.copy()
    np.fill_diagonal(off, 0.0)
    return float(np.linalg.norm(off))


def _jacobi(a: np.ndarray) -> tuple[np.ndarray, np.ndarray, int]:
    n = a.shape[0]
    v = np.eye(n, dtype=np.complex128)
    if n < 2:
        return np.real(np.diag(a)).copy(), v, 0
    norm = np.linalg.norm(a)
    target = _EPS * norm
    # rotating away entries this small changes nothing; skipping them keeps b / |b| finite
    negligible = max(_EPS * _EPS * norm, np.finfo(float).tiny / _EPS)
    schedule = _round_robin(n)
    prev_off = np.inf
    sweeps = 0
    for sweeps in range(1, MAX_SWEEPS + 1):
        for p, q in schedule:
            b = a[p, q]
            mag = np.abs(b)
            active = mag > negligible
            if not np.any(active):
                a[p, q] = 0.0
                a[q, p] = 0.0
                continue
            app = np.real(a[p, p])
            aqq = np.real(a[q, q])
            safe = np.where(active, mag, 1.0)
            # tan of the rotation angle, written so a tiny |b| cannot overflow
            d = aqq - app
            sign = np.where(d >= 0, 1.0, -1.0)
            t = sign * (2.0 * safe) / (np.abs(d) + np.hypot(d, 2.0 * safe))
            c = np.where(active, 1.0 / np.sqrt(1.0 + t * t), 1.0)
            s = np.where(active, t * c, 0.0)
            ph = np.where(active, b / safe, 1.0)

            # A <- A G  (columns), then A <- G^H A  (rows).
            ap = a[:, p].copy()
            aq = a[:, q]
            a[:, p] = ap * c - aq * (s * np.conj(ph))
            a[:, q] = ap * (s * ph) + aq * c
            ap = a[p, :].copy()
            aq = a[q, :]
            a[p, :] = c[:, None] * ap - (s * ph)[:, None] * aq
            a[q, :] = (s * np.conj(ph))[:, None] * ap + c[:, None] * aq
            a[p, q] = 0.0
            a[q, p] = 0.0
            vp = v[:, p].copy()
            vq = v[:, q]
            v[:, p] = vp * c - vq * (s * np.conj(ph))
            v[:, q] = vp * (s * ph) + vq * c
        off = _off_norm(a)
        if off <= target or off >= prev_off:
            break
        prev_off = off
    return np.real(np.diag(a)).copy(), v, sweeps


def hermitian_eig(m, tol: TolerancePolicy = DEFAULT_TOL) -> EigenResult:
    """Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.

    Eigenvalues are returned in descending order; exact ties keep the order of
    the diagonal positions they converged on.

    Raises
    ------
    NotHermitian
        If ``‖M − M*‖`` exceeds ``hermiticity_tol`` relative to ``max(1, ‖M‖)``.
    NoConvergence
        If the reconstruction misses ``residual_tol`` after the sweep budget.
    """
    m = as_matrix(m)
    h = _require_hermitian(m, tol)
    n = h.shape[0]
    if n == 0:
        return EigenResult(np.zeros(0), np.zeros((0, 0), dtype=np.complex128))
    lam, vecs, _ = _jacobi(h.copy())
    order = np.lexsort((np.arange(n), -lam))
    result = EigenResult(lam[order], vecs[:, order])
    resid = np.linalg.norm(h - result.reconstruct())
    if resid > tol.residual_tol * scale_of(h):
        raise NoConvergence(f"Jacobi reconstruction residual {resid:.3e} after {MAX_SWEEPS} sweeps")
    return result


def spectral_scale(eigenvalues: np.ndarray) -> float:
    if eigenvalues.size == 0:
        return 1.0
    return max(1.0, float(np.max(np.abs(eigenvalues))))


def min_eigenvalue(m, tol: TolerancePolicy = DEFAULT_TOL) -> float:
    lam = hermitian_eig(m, tol).eigenvalues
    return float(lam[-1]) if lam.size else 0.0


def psd_check(m, tol: TolerancePolicy = DEFAULT_TOL) -> bool:
    lam = hermitian_eig(m, tol).eigenvalues
    if lam.size == 0:
        return True
    return bool(lam[-1] >= -tol.psd_tol * spectral_scale(lam))


def psd_factor(g, tol: TolerancePolicy = DEFAULT_TOL) -> tuple[np.ndarray, int]:
    """Factor a PSD matrix as ``G = F* F`` with ``F`` of full row rank.

    ``F = diag(sqrt(λ_i)) V*`` restricted to eigenvalues above
    ``rank_cutoff * λ_max``.
    """
    eig = hermitian_eig(g, tol)
    lam = eig.eigenvalues
    n = lam.size
    if n == 0:
        return np.zeros((0, 0), dtype=np.complex128), 0
    if lam[-1] < -tol.psd_tol * spectral_scale(lam):
        raise NotPSD(f"minimum eigenvalue {lam[-1]:.6e} is negative")
    lam_max = lam[0]
    if lam_max <= 0:
        return np.zeros((0, n), dtype=np.complex128), 0
    keep = lam > tol.rank_cutoff * lam_max
    rank = int(np.count_nonzero(keep))
    f = np.sqrt(lam[keep])[:, None] * eig.vectors[:, keep].conj().T
    return f, rank


def numerical_rank(m, tol: TolerancePolicy = DEFAULT_TOL) -> int:
    """Rank of an arbitrary matrix via the spectrum of ``M M*``.

    The cutoff is applied to Gram eigenvalues, exactly as in :func:`psd_factor`,
    so ``numerical_rank(F) == rank`` for every factor it returns.
    """
    m = as_matrix(m)
    if m.size == 0:
        return 0
    lam = hermitian_eig(m @ m.conj().T, tol).eigenvalues
    if lam[0] <= 0:
        return 0
    return int(np.count_nonzero(lam > tol.rank_cutoff * lam[0]))


def null_space(m, tol: TolerancePolicy = DEFAULT_TOL) -> np.ndarray:
    """Orthonormal basis (as columns) of ``{x : M x = 0}``."""
    m = as_matrix(m)
    n = m.shape[1]
    if m.shape[0] == 0 or n == 0:
        return np.eye(n, dtype=np.complex128)
    eig = hermitian_eig(m.conj().T @ m, tol)
    lam = eig.eigenvalues
    if lam[0] <= 0:
        return eig.vectors
    return eig.vectors[:, lam <= tol.rank_cutoff * lam[0]]


def lstsq_solve(a, b, tol: TolerancePolicy = DEFAULT_TOL) -> tuple[np.ndarray, float]:
    """Minimum-norm least-squares solution of ``X A = B``.

    Returns ``(X, ‖X A − B‖_F)``.
    """
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[1]:
        raise DimensionMismatch(f"X·A = B needs A.cols == B.cols, got {a.shape} and {b.shape}")
    if a.shape[0] == 0 or b.shape[0] == 0:
        x = np.zeros((b.shape[0], a.shape[0]), dtype=np.complex128)
    else:
        xt, *_ = np.linalg.lstsq(a.T, b.T, rcond=tol.rank_cutoff)
        x = xt.T
    residual = float(np.linalg.norm(x @ a - b))
    return x, residual
