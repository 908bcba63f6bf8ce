"""Completely positive maps ``E: B → S_A(A^m)`` and their minimal dilations.

A map is stored by its values on the matrix units of ``B``. Complete
positivity is certified by the Choi-Gram, the kernel ``(u, u') ↦ E(u* u')``
on matrix units. The dilation ``(M, π, J)`` is read off a Kolmogorov
decomposition ``D`` of that kernel: ``J = D(e)`` and ``π(u)`` is the unique
operator with ``π(u) D(u') = D(u u')`` for every unit ``u'``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .algebra import (
    AlgElement,
    CStarSignature,
    MatrixOverA,
    is_positive_matrix_over_A,
    matrix_over_A_min_eigenvalue,
    matrix_units,
    unit_index,
    unit_labels,
)
from .errors import (
    DimensionMismatch,
    NotCompletelyPositive,
    NotHermitian,
    NotPositiveDefinite,
    NotPositiveEffect,
    NotUnitary,
    ResidualExceeded,
    SignatureMismatch,
)
from .kolmogorov import Kernel, assemble_gram, decompose, kernel_is_positive_definite, solve_unitary
from .modules import AdjointableMap, HilbertElement, HilbertModule, ModuleElement, ModuleMap, SesquiMap, sesqui_is_positive
from .numkernel import DEFAULT_TOL, TolerancePolicy, lstsq_solve, numerical_rank


class CPMapTable:
    """A linear map ``B → S_A(A^m)`` given on the matrix units of ``B``."""

    __slots__ = ("domain", "signature", "m", "values", "_stacks")

    def __init__(
        self,
        domain: CStarSignature,
        signature: CStarSignature,
        m: int,
        values: Sequence[SesquiMap],
        tol: TolerancePolicy = DEFAULT_TOL,
        check: bool = True,
    ):
        values = tuple(values)
        if len(values) != domain.dim:
            raise DimensionMismatch(f"{len(values)} values for a domain of dimension {domain.dim}")
        for s in values:
            if s.signature != signature or s.m != m:
                raise SignatureMismatch("table values live on different modules")
        self.domain = domain
        self.signature = signature
        self.m = int(m)
        self.values = values
        self._stacks = tuple(np.stack([s.flats[k] for s in values]) for k in range(signature.n_blocks))
        if check:
            err = self.hermiticity_error()
            scale = max(1.0, max(s.frobenius() for s in values))
            if err > tol.hermiticity_tol * scale:
                raise NotHermitian(f"E(u*) differs from E(u)^* by {err:.3e}")

    @classmethod
    def from_function(
        cls,
        domain: CStarSignature,
        signature: CStarSignature,
        m: int,
        fn: Callable[[AlgElement], SesquiMap],
        **kwargs,
    ) -> "CPMapTable":
        return cls(domain, signature, m, [fn(u) for u in matrix_units(domain)], **kwargs)

    @classmethod
    def from_channel(
        cls, domain: CStarSignature, signature: CStarSignature, channel: Callable[[AlgElement], AlgElement], **kwargs
    ) -> "CPMapTable":
        """The map ``E(b)(v, w) = v* φ(b) w`` on ``A^1`` for a linear ``φ: B → A``."""
        return cls.from_function(
            domain, signature, 1, lambda u: SesquiMap(MatrixOverA.from_entries(signature, [[channel(u)]])), **kwargs
        )

    def hermiticity_error(self) -> float:
        err = 0.0
        for k, i, j in unit_labels(self.domain):
            a = self.values[unit_index(self.domain, k, i, j)]
            b = self.values[unit_index(self.domain, k, j, i)]
            err = max(err, (b - a.star_transpose()).frobenius())
        return err

    def norm(self) -> float:
        return max(s.frobenius() for s in self.values)

    def __call__(self, b: AlgElement) -> SesquiMap:
        return eval_cp(self, b)


def eval_cp(E: CPMapTable, b: AlgElement) -> SesquiMap:
    if b.signature != E.domain:
        raise SignatureMismatch(f"argument in {b.signature}, map defined on {E.domain}")
    coeffs = b.to_vector()
    flats = [np.tensordot(coeffs, stack, axes=1) for stack in E._stacks]
    return SesquiMap.from_flats(E.signature, E.m, flats)


def choi_gram(E: CPMapTable) -> Kernel:
    """The kernel ``(u, u') ↦ E(u* u')`` on the matrix units of ``B``.

    For units of the same block, ``E_ij* E_i'j' = δ_ii' E_jj'``; units of
    different blocks multiply to zero.
    """
    labels = unit_labels(E.domain)
    zero = SesquiMap.zero(E.signature, E.m)
    table = {}
    for x in labels:
        for y in labels:
            (k, i, j), (k2, i2, j2) = x, y
            if k == k2 and i == i2:
                table[(x, y)] = E.values[unit_index(E.domain, k, j, j2)]
            else:
                table[(x, y)] = zero
    return Kernel(E.signature, E.m, labels, table)


def is_completely_positive(E: CPMapTable, tol: TolerancePolicy = DEFAULT_TOL) -> bool:
    return kernel_is_positive_definite(choi_gram(E), tol)


def cp_witness(E: CPMapTable, tol: TolerancePolicy = DEFAULT_TOL) -> tuple[float, int]:
    """Smallest Choi-Gram eigenvalue and the block of ``A`` where it occurs."""
    return matrix_over_A_min_eigenvalue(assemble_gram(choi_gram(E)), tol)


def _amplified(E: CPMapTable, b_blocks: Sequence[np.ndarray], n: int) -> MatrixOverA:
    """``(E(b_ij))_ij`` for ``(b_ij) ∈ M_n(B)`` given as one matrix per block of ``B``."""
    dims = E.domain.block_dims
    entries = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            sub = [blk[i * p:(i + 1) * p, j * p:(j + 1) * p] for blk, p in zip(b_blocks, dims)]
            entries[i][j] = eval_cp(E, AlgElement(E.domain, sub))
    flats = []
    for k, nk in enumerate(E.signature.block_dims):
        w = E.m * nk
        flat = np.zeros((n * w, n * w), dtype=np.complex128)
        for i in range(n):
            for j in range(n):
                flat[i * w:(i + 1) * w, j * w:(j + 1) * w] = entries[i][j].flats[k]
        flats.append(flat)
    return MatrixOverA(E.signature, n * E.m, flats)


def _choi_witnesses(domain: CStarSignature, n: int) -> list[list[np.ndarray]]:
    out = []
    for l, p in enumerate(domain.block_dims):
        blocks = [np.zeros((n * q, n * q), dtype=np.complex128) for q in domain.block_dims]
        for i in range(min(n, p)):
            for j in range(min(n, p)):
                blocks[l][i * p + i, j * p + j] = 1.0
        out.append(blocks)
    return out


def amplification_check(
    E: CPMapTable,
    n: int,
    trials: int,
    tol: TolerancePolicy = DEFAULT_TOL,
    rng: np.random.Generator | int | None = None,
) -> bool:
    """Try to falsify positivity of the ``n``-th amplification.

    The first trials are the Choi witnesses ``(E^(l)_ij)_ij`` (one per block of
    ``B``), the rest random positive matrices ``c* c`` in ``M_n(B)``. Returns
    ``False`` as soon as one image is not positive.
    """
    if n < 1:
        raise ValueError("amplification order must be at least 1")
    rng = np.random.default_rng(rng)
    candidates = _choi_witnesses(E.domain, n)[: max(trials, 1)]
    for _ in range(max(trials - len(candidates), 0)):
        blocks = []
        for p in E.domain.block_dims:
            c = rng.standard_normal((n * p, n * p)) + 1j * rng.standard_normal((n * p, n * p))
            blocks.append(c.conj().T @ c)
        candidates.append(blocks)
    for blocks in candidates:
        if not is_positive_matrix_over_A(_amplified(E, blocks, n), tol):
            return False
    return True


@dataclass(frozen=True)
class DilationReport:
    reconstruction: float
    unitality: float
    multiplicativity: float
    star: float
    adjointability: float
    span_ranks: tuple[int, ...]
    ranks: tuple[int, ...]
    jj_gap: float
    residual_tol: float

    @property
    def clauses(self) -> dict[str, bool]:
        tol = self.residual_tol
        return {
            "reconstruction": self.reconstruction <= tol,
            "unitality": self.unitality <= tol,
            "multiplicativity": self.multiplicativity <= tol,
            "star": self.star <= tol,
            "adjointability": self.adjointability <= tol,
            "minimality": self.span_ranks == self.ranks,
        }

    @property
    def passed(self) -> bool:
        return all(self.clauses.values())

    def failed_clauses(self) -> list[str]:
        return [name for name, ok in self.clauses.items() if not ok]

    def as_dict(self) -> dict:
        return {
            "reconstruction": self.reconstruction,
            "unitality": self.unitality,
            "multiplicativity": self.multiplicativity,
            "star": self.star,
            "adjointability": self.adjointability,
            "span_ranks": list(self.span_ranks),
            "ranks": list(self.ranks),
            "jj_gap": self.jj_gap,
            "clauses": self.clauses,
            "passed": self.passed,
        }


@dataclass(frozen=True, eq=False)
class Dilation:
    domain: CStarSignature
    module: HilbertModule
    pi: tuple[AdjointableMap, ...]
    J: ModuleMap
    report: DilationReport | None = None
    warnings: tuple[str, ...] = field(default=())

    @property
    def ranks(self) -> tuple[int, ...]:
        return self.module.ranks

    def pi_of(self, b: AlgElement) -> AdjointableMap:
        if b.signature != self.domain:
            raise SignatureMismatch(f"π defined on {self.domain}, got {b.signature}")
        coeffs = b.to_vector()
        blocks = []
        for k in range(len(self.module.ranks)):
            stack = np.stack([p.blocks[k] for p in self.pi])
            blocks.append(np.tensordot(coeffs, stack, axes=1))
        return AdjointableMap(self.module, self.module, blocks)

    def D(self, b: AlgElement) -> ModuleMap:
        return self.pi_of(b) @ self.J

    def with_report(self, report: DilationReport) -> "Dilation":
        return Dilation(self.domain, self.module, self.pi, self.J, report, self.warnings)


def _relative(err: float, scale: float) -> float:
    return err / max(1.0, scale)


def reconstruction_residual(E: CPMapTable, d: Dilation, b: AlgElement, v: ModuleElement, w: ModuleElement) -> float:
    """Absolute residual ``‖E(b)(v, w) − <Jv|π(b)Jw>‖``."""
    lhs = eval_cp(E, b)(v, w)
    jv = d.J(v)
    rhs = d.module.inner(jv, d.pi_of(b)(d.J(w)))
    return (lhs - rhs).frobenius()


def _random_alg(sig: CStarSignature, rng: np.random.Generator) -> AlgElement:
    return AlgElement(sig, [rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)) for n in sig.block_dims])


def _random_hilbert(module: HilbertModule, rng: np.random.Generator) -> HilbertElement:
    dims = module.signature.block_dims
    return HilbertElement(
        module, [rng.standard_normal((r, n)) + 1j * rng.standard_normal((r, n)) for r, n in zip(module.ranks, dims)]
    )


def _block_diff(p: AdjointableMap, q: AdjointableMap) -> float:
    return max((float(np.linalg.norm(x - y)) for x, y in zip(p.blocks, q.blocks)), default=0.0)


def verify_dilation(
    E: CPMapTable,
    d: Dilation,
    trials: int = 20,
    tol: TolerancePolicy = DEFAULT_TOL,
    rng: np.random.Generator | int | None = 0,
) -> DilationReport:
    """Check every clause of a minimal dilation.

    The identities are checked exhaustively on matrix units and generators
    (which covers them by linearity) and again on ``trials`` random samples.
    """
    if E.domain != d.domain or E.signature != d.module.signature or E.m != d.J.m:
        raise DimensionMismatch("dilation does not match the map")
    rng = np.random.default_rng(rng)
    sig, m = E.signature, E.m
    labels = unit_labels(E.domain)

    recon = 0.0
    for u, val in zip(d.pi, E.values):
        for k, jk in enumerate(d.J.blocks):
            err = float(np.linalg.norm(jk.conj().T @ u.blocks[k] @ jk - val.flats[k]))
            recon = max(recon, _relative(err, float(np.linalg.norm(val.flats[k]))))
    e_norm = E.norm()
    for _ in range(trials):
        b = _random_alg(E.domain, rng)
        v = ModuleElement(sig, [_random_alg(sig, rng) for _ in range(m)])
        w = ModuleElement(sig, [_random_alg(sig, rng) for _ in range(m)])
        err = reconstruction_residual(E, d, b, v, w)
        recon = max(recon, _relative(err, e_norm * b.frobenius() * v.frobenius() * w.frobenius()))

    ident = AdjointableMap.identity(d.module)
    unitality = _block_diff(d.pi_of(E.domain.identity()), ident)

    mult = 0.0
    star = 0.0
    for x, pu in zip(labels, d.pi):
        k, i, j = x
        star = max(star, _block_diff(d.pi[unit_index(E.domain, k, j, i)], pu.adjoint()))
        for y, pv in zip(labels, d.pi):
            k2, i2, j2 = y
            prod = pu @ pv
            if k == k2 and j == i2:
                target = d.pi[unit_index(E.domain, k, i, j2)]
            else:
                target = AdjointableMap.zero(d.module)
            mult = max(mult, _block_diff(prod, target))
    adjoint = 0.0
    for _ in range(trials):
        b, b2 = _random_alg(E.domain, rng), _random_alg(E.domain, rng)
        pb, pb2 = d.pi_of(b), d.pi_of(b2)
        scale = b.frobenius() * b2.frobenius()
        mult = max(mult, _relative(_block_diff(d.pi_of(b @ b2), pb @ pb2), scale))
        star = max(star, _relative(_block_diff(d.pi_of(b.adjoint()), pb.adjoint()), b.frobenius()))
        x, y = _random_hilbert(d.module, rng), _random_hilbert(d.module, rng)
        lhs = d.module.inner(pb.adjoint()(x), y)
        rhs = d.module.inner(x, pb(y))
        adjoint = max(adjoint, _relative((lhs - rhs).frobenius(), b.frobenius() * x.frobenius() * y.frobenius()))

    span = []
    for k, r in enumerate(d.module.ranks):
        if r == 0:
            span.append(0)
            continue
        stacked = np.hstack([p.blocks[k] @ d.J.blocks[k] for p in d.pi])
        span.append(numerical_rank(stacked, tol))

    e_of_e = eval_cp(E, E.domain.identity())
    jj = max(
        (
            _relative(float(np.linalg.norm(jk.conj().T @ jk - f)), float(np.linalg.norm(f)))
            for jk, f in zip(d.J.blocks, e_of_e.flats)
        ),
        default=0.0,
    )
    return DilationReport(
        reconstruction=recon,
        unitality=unitality,
        multiplicativity=mult,
        star=star,
        adjointability=adjoint,
        span_ranks=tuple(span),
        ranks=d.module.ranks,
        jj_gap=jj,
        residual_tol=tol.residual_tol,
    )


def ksgns_dilate(
    E: CPMapTable,
    tol: TolerancePolicy = DEFAULT_TOL,
    trials: int = 20,
    rng: np.random.Generator | int | None = 0,
) -> Dilation:
    """Minimal dilation ``(M, π, J)`` of a completely positive map.

    Raises
    ------
    NotCompletelyPositive
        If the Choi-Gram is not positive.
    ResidualExceeded
        If some ``π(u)`` cannot be solved for to ``residual_tol``.
    """
    try:
        dec = decompose(choi_gram(E), tol)
    except NotPositiveDefinite as exc:
        raise NotCompletelyPositive(str(exc)) from None
    module = dec.module
    labels = unit_labels(E.domain)
    dims = E.domain.block_dims

    J = ModuleMap(module, E.m, [np.zeros_like(b) for b in dec.D[labels[0]].blocks])
    for l, p in enumerate(dims):
        for i in range(p):
            J = J + dec.D[(l, i, i)]

    F = dec.factors()
    pi = []
    for k, i, j in labels:
        targets = []
        for k2, i2, j2 in labels:
            if k == k2 and j == i2:
                targets.append(dec.D[(k, i, j2)])
            else:
                targets.append(ModuleMap(module, E.m, [np.zeros_like(b) for b in dec.D[labels[0]].blocks]))
        blocks = []
        for blk, (fk, r) in enumerate(zip(F, module.ranks)):
            gk = np.hstack([t.blocks[blk] for t in targets])
            if r == 0:
                blocks.append(np.zeros((0, 0)))
                continue
            p_k, resid = lstsq_solve(fk, gk, tol)
            if _relative(resid, float(np.linalg.norm(gk))) > tol.residual_tol:
                raise ResidualExceeded(f"π on unit {(k, i, j)}, block {blk}: residual {resid:.3e}")
            blocks.append(p_k)
        pi.append(AdjointableMap(module, module, blocks))

    d = Dilation(E.domain, module, tuple(pi), J)
    return d.with_report(verify_dilation(E, d, trials, tol, rng))


def conjugate_dilation(d: Dilation, u: AdjointableMap) -> Dilation:
    """The dilation ``(M', u π u*, u J)`` for a unitary ``u: M → M'``."""
    ustar = u.adjoint()
    pi = tuple(u @ p @ ustar for p in d.pi)
    return Dilation(d.domain, u.codomain, pi, u @ d.J, d.report, d.warnings)


def dilation_intertwiner(d1: Dilation, d2: Dilation, tol: TolerancePolicy = DEFAULT_TOL) -> AdjointableMap:
    """Unitary ``U`` with ``π2(b) = U π1(b) U*`` and ``J2 = U J1``."""
    if d1.domain != d2.domain:
        raise SignatureMismatch("dilations of maps on different algebras")
    f1 = [np.hstack([p.blocks[k] @ d1.J.blocks[k] for p in d1.pi]) for k in range(len(d1.module.ranks))]
    f2 = [np.hstack([p.blocks[k] @ d2.J.blocks[k] for p in d2.pi]) for k in range(len(d2.module.ranks))]
    u = solve_unitary(d1.module, d2.module, f1, f2, tol)
    ustar = u.adjoint()
    for p1, p2 in zip(d1.pi, d2.pi):
        err = _block_diff(u @ p1 @ ustar, p2)
        if err > tol.residual_tol * max(1.0, p2.max_block_norm()):
            raise NotUnitary(f"U π1 U* differs from π2 by {err:.3e}")
    uj = u @ d1.J
    err = max((float(np.linalg.norm(x - y)) for x, y in zip(uj.blocks, d2.J.blocks)), default=0.0)
    if err > tol.residual_tol * max(1.0, d2.J.frobenius()):
        raise NotUnitary(f"U J1 differs from J2 by {err:.3e}")
    return u


def naimark(
    povm: Sequence[SesquiMap],
    tol: TolerancePolicy = DEFAULT_TOL,
    trials: int = 20,
    rng: np.random.Generator | int | None = 0,
) -> Dilation:
    """Dilate a finite POVM (commutative domain ``C^q``).

    ``π`` of the outcome indicators are orthogonal projections summing to the
    identity. A POVM whose effects do not sum to the identity is still dilated
    and the returned dilation carries a warning.
    """
    povm = list(povm)
    if not povm:
        raise ValueError("a POVM needs at least one effect")
    for idx, s in enumerate(povm):
        if not sesqui_is_positive(s, tol):
            raise NotPositiveEffect(f"effect {idx} is not positive")
    sig, m = povm[0].signature, povm[0].m
    total = povm[0]
    for s in povm[1:]:
        total = total + s
    gap = (total - SesquiMap.identity(sig, m)).frobenius()
    warnings = ()
    if gap > tol.residual_tol * max(1.0, total.frobenius()):
        warnings = (f"effects sum to the identity only up to {gap:.3e}",)
    domain = CStarSignature((1,) * len(povm))
    E = CPMapTable(domain, sig, m, povm, tol)
    d = ksgns_dilate(E, tol, trials, rng)
    return Dilation(d.domain, d.module, d.pi, d.J, d.report, warnings)
