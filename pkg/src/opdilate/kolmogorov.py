"""Positive-definite A-kernels on finite index sets and their minimal
Kolmogorov decompositions.

For a kernel ``K`` on points ``x_1, ..., x_N`` with values in A-sesquilinear
maps on ``A^m`` the Gram of the generators ``(x, j)`` is an ``(N m) x (N m)``
matrix over ``A``. Factoring every flattened block as ``G_k = F_k* F_k`` with
``F_k`` of full row rank gives the Hilbert module ``⊕_k C^{r_k x n_k}`` and the
maps ``D(x)`` as column slices of ``F_k``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Mapping, Sequence

import numpy as np

from .algebra import CStarSignature, MatrixOverA, is_positive_matrix_over_A
from .errors import (
    DimensionMismatch,
    NotPositiveDefinite,
    NotPSD,
    NotUnitary,
    RankMismatch,
    ResidualExceeded,
    SignatureMismatch,
)
from .modules import AdjointableMap, HilbertModule, ModuleMap, SesquiMap
from .numkernel import DEFAULT_TOL, TolerancePolicy, is_hermitian, lstsq_solve, numerical_rank, psd_factor


class Kernel:
    """A kernel ``X x X → S_A(A^m)`` on a finite ordered set of points."""

    __slots__ = ("signature", "m", "points", "table")

    def __init__(
        self,
        signature: CStarSignature,
        m: int,
        points: Sequence[Hashable],
        table: Mapping[tuple[Hashable, Hashable], SesquiMap],
    ):
        points = tuple(points)
        if not points:
            raise ValueError("a kernel needs at least one point")
        if len(set(points)) != len(points):
            raise ValueError("kernel points must be distinct")
        for x in points:
            for y in points:
                s = table[(x, y)]
                if s.signature != signature or s.m != m:
                    raise SignatureMismatch(f"value at ({x!r}, {y!r}) lives on a different module")
        self.signature = signature
        self.m = int(m)
        self.points = points
        self.table = {(x, y): table[(x, y)] for x in points for y in points}

    @classmethod
    def from_gram(cls, signature: CStarSignature, m: int, points: Sequence[Hashable], gram: MatrixOverA) -> "Kernel":
        """Inverse of :func:`assemble_gram`."""
        points = tuple(points)
        if gram.m != len(points) * m:
            raise DimensionMismatch(f"Gram of size {gram.m} for {len(points)} points and m={m}")
        table = {}
        for a, x in enumerate(points):
            for b, y in enumerate(points):
                flats = []
                for f, n in zip(gram.flats, signature.block_dims):
                    w = m * n
                    flats.append(f[a * w:(a + 1) * w, b * w:(b + 1) * w])
                table[(x, y)] = SesquiMap.from_flats(signature, m, flats)
        return cls(signature, m, points, table)

    def __call__(self, x, y) -> SesquiMap:
        return self.table[(x, y)]

    def symmetry_error(self) -> float:
        """Largest ``‖K(y, x) − K(x, y)^*‖`` over all pairs."""
        err = 0.0
        for x in self.points:
            for y in self.points:
                err = max(err, (self.table[(y, x)] - self.table[(x, y)].star_transpose()).frobenius())
        return err


def assemble_gram(kernel: Kernel) -> MatrixOverA:
    """Gram over ``A`` of the generators ``(x, j)`` in point-major order."""
    sig, m, pts = kernel.signature, kernel.m, kernel.points
    flats = []
    for k, n in enumerate(sig.block_dims):
        w = m * n
        flat = np.zeros((len(pts) * w, len(pts) * w), dtype=np.complex128)
        for a, x in enumerate(pts):
            for b, y in enumerate(pts):
                flat[a * w:(a + 1) * w, b * w:(b + 1) * w] = kernel.table[(x, y)].flats[k]
        flats.append(flat)
    return MatrixOverA(sig, len(pts) * m, flats)


def kernel_is_positive_definite(kernel: Kernel, tol: TolerancePolicy = DEFAULT_TOL) -> bool:
    return is_positive_matrix_over_A(assemble_gram(kernel), tol)


@dataclass(frozen=True)
class KolmogorovReport:
    reconstruction: float
    span_ranks: tuple[int, ...]
    ranks: tuple[int, ...]
    residual_tol: float

    @property
    def reconstruction_ok(self) -> bool:
        return self.reconstruction <= self.residual_tol

    @property
    def minimal(self) -> bool:
        return self.span_ranks == self.ranks

    @property
    def passed(self) -> bool:
        return self.reconstruction_ok and self.minimal

    def as_dict(self) -> dict:
        return {
            "reconstruction": self.reconstruction,
            "span_ranks": list(self.span_ranks),
            "ranks": list(self.ranks),
            "clauses": {"reconstruction": self.reconstruction_ok, "minimality": self.minimal},
            "passed": self.passed,
        }


@dataclass(frozen=True, eq=False)
class KolmogorovDecomposition:
    module: HilbertModule
    points: tuple
    D: dict
    gram_rank: tuple[int, ...]
    report: KolmogorovReport | None = field(default=None)

    def factors(self) -> list[np.ndarray]:
        """Per block, the images of all generators side by side (``F_k``)."""
        return _stack(self.module, [self.D[x] for x in self.points])


def _stack(module: HilbertModule, maps: Sequence[ModuleMap]) -> list[np.ndarray]:
    out = []
    for k, r in enumerate(module.ranks):
        if maps:
            out.append(np.hstack([d.blocks[k] for d in maps]))
        else:
            out.append(np.zeros((r, 0), dtype=np.complex128))
    return out


def _relative(err: float, ref: np.ndarray) -> float:
    return err / max(1.0, float(np.linalg.norm(ref)))


def verify_decomposition(kernel: Kernel, d: KolmogorovDecomposition, tol: TolerancePolicy = DEFAULT_TOL) -> KolmogorovReport:
    """Check ``<D(x)v|D(y)w> = K(x, y)(v, w)`` and that the images span ``M``."""
    gram = assemble_gram(kernel)
    recon = 0.0
    span = []
    for f, g in zip(d.factors(), gram.flats):
        recon = max(recon, _relative(float(np.linalg.norm(f.conj().T @ f - g)), g))
        span.append(numerical_rank(f, tol) if f.shape[0] else 0)
    return KolmogorovReport(recon, tuple(span), d.module.ranks, tol.residual_tol)


def decompose(kernel: Kernel, tol: TolerancePolicy = DEFAULT_TOL) -> KolmogorovDecomposition:
    """Minimal Kolmogorov decomposition of a positive-definite kernel.

    Raises
    ------
    NotPositiveDefinite
        If some flattened block of the assembled Gram is not PSD.
    ResidualExceeded
        If the factorization does not reproduce the kernel to ``residual_tol``.
    """
    sig, m = kernel.signature, kernel.m
    gram = assemble_gram(kernel)
    factors, ranks = [], []
    for k, flat in enumerate(gram.flats):
        if not is_hermitian(flat, tol):
            raise NotPositiveDefinite(f"Gram block {k} is not Hermitian")
        try:
            f, r = psd_factor(flat, tol)
        except NotPSD as exc:
            raise NotPositiveDefinite(f"Gram block {k}: {exc}") from None
        factors.append(f)
        ranks.append(r)
    module = HilbertModule(sig, tuple(ranks))
    D = {}
    for a, x in enumerate(kernel.points):
        blocks = []
        for f, n in zip(factors, sig.block_dims):
            w = m * n
            blocks.append(f[:, a * w:(a + 1) * w])
        D[x] = ModuleMap(module, m, blocks)
    d = KolmogorovDecomposition(module, kernel.points, D, tuple(ranks))
    report = verify_decomposition(kernel, d, tol)
    if not report.reconstruction_ok:
        raise ResidualExceeded(f"Kolmogorov reconstruction residual {report.reconstruction:.3e}")
    return KolmogorovDecomposition(module, kernel.points, D, tuple(ranks), report)


def solve_unitary(
    domain: HilbertModule,
    codomain: HilbertModule,
    f1: Sequence[np.ndarray],
    f2: Sequence[np.ndarray],
    tol: TolerancePolicy = DEFAULT_TOL,
) -> AdjointableMap:
    """The unitary ``U`` with ``U_k F1_k = F2_k`` in every block."""
    if domain.ranks != codomain.ranks:
        raise RankMismatch(f"ranks {domain.ranks} and {codomain.ranks} differ")
    blocks = []
    for k, (a, b) in enumerate(zip(f1, f2)):
        if a.shape[1] != b.shape[1]:
            raise DimensionMismatch(f"block {k}: {a.shape} vs {b.shape}")
        u, resid = lstsq_solve(a, b, tol)
        r = u.shape[0]
        unit_err = float(np.linalg.norm(u.conj().T @ u - np.eye(r))) if r else 0.0
        co_err = float(np.linalg.norm(u @ u.conj().T - np.eye(r))) if r else 0.0
        if max(unit_err, co_err) > tol.residual_tol or _relative(resid, b) > tol.residual_tol:
            raise NotUnitary(
                f"block {k}: ‖U*U − I‖ = {unit_err:.3e}, intertwining residual {resid:.3e}"
            )
        blocks.append(u)
    return AdjointableMap(domain, codomain, blocks)


def intertwiner(
    d1: KolmogorovDecomposition, d2: KolmogorovDecomposition, tol: TolerancePolicy = DEFAULT_TOL
) -> AdjointableMap:
    """Unitary ``U: M1 → M2`` with ``U D1(x) = D2(x)`` for every point."""
    if set(d1.points) != set(d2.points):
        raise DimensionMismatch("decompositions are indexed by different point sets")
    if d1.module.signature != d2.module.signature:
        raise SignatureMismatch("decompositions over different algebras")
    f1 = d1.factors()
    f2 = _stack(d2.module, [d2.D[x] for x in d1.points])
    return solve_unitary(d1.module, d2.module, f1, f2, tol)


def transform_decomposition(d: KolmogorovDecomposition, u: AdjointableMap) -> KolmogorovDecomposition:
    """The decomposition ``(M', u D)`` for a unitary ``u: M → M'``."""
    D = {x: u @ d.D[x] for x in d.points}
    return KolmogorovDecomposition(u.codomain, d.points, D, u.codomain.ranks, d.report)
