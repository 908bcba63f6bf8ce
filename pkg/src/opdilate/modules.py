"""Right A-modules: free modules ``A^m``, A-sesquilinear maps, Hilbert modules.

A-sesquilinear maps on ``A^m`` are in bijection with ``M_m(A)`` through
``s(v, w) = Σ_ij v_i* S_ij w_j``. Hilbert modules are kept in the normal form
``⊕_k C^{r_k x n_k}`` with inner product ``<T|S> = (T_k* S_k)_k``. Adjointable
operators on them are per-block left multiplications.
"""
from __future__ import annotations

from dataclasses import dataclass
from numbers import Number
from typing import Sequence

import numpy as np

from .algebra import (
    AlgElement,
    CStarSignature,
    MatrixOverA,
    _frozen,
    is_positive_matrix_over_A,
    matrix_over_A_min_eigenvalue,
    matrix_units,
)
from .errors import DimensionMismatch, ShapeMismatch, SignatureMismatch
from .numkernel import DEFAULT_TOL, TolerancePolicy, hermitian_eig, is_hermitian, null_space


class ModuleElement:
    """An element ``(a_1, ..., a_m)`` of the free right module ``A^m``."""

    __slots__ = ("signature", "coords")

    def __init__(self, signature: CStarSignature, coords: Sequence[AlgElement]):
        coords = tuple(coords)
        for a in coords:
            if a.signature != signature:
                raise SignatureMismatch(f"coordinate has signature {a.signature}, expected {signature}")
        self.signature = signature
        self.coords = coords

    @property
    def m(self) -> int:
        return len(self.coords)

    @classmethod
    def zero(cls, signature: CStarSignature, m: int) -> "ModuleElement":
        return cls(signature, [signature.zero()] * m)

    @classmethod
    def generator(cls, signature: CStarSignature, m: int, j: int) -> "ModuleElement":
        coords = [signature.zero()] * m
        coords[j] = signature.identity()
        return cls(signature, coords)

    @classmethod
    def from_columns(cls, signature: CStarSignature, m: int, cols: Sequence[np.ndarray]) -> "ModuleElement":
        """Build from per-block stacked columns of shape ``(m n_k, n_k)``."""
        coords = []
        for i in range(m):
            blocks = [c[i * n:(i + 1) * n, :] for c, n in zip(cols, signature.block_dims)]
            coords.append(AlgElement(signature, blocks))
        return cls(signature, coords)

    def column(self, k: int) -> np.ndarray:
        """Coordinates of block ``k`` stacked vertically, shape ``(m n_k, n_k)``."""
        return np.vstack([a.blocks[k] for a in self.coords])

    def _check(self, other: "ModuleElement"):
        if other.signature != self.signature or other.m != self.m:
            raise DimensionMismatch("module elements live in different modules")

    def __add__(self, other: "ModuleElement") -> "ModuleElement":
        self._check(other)
        return ModuleElement(self.signature, [x + y for x, y in zip(self.coords, other.coords)])

    def __sub__(self, other: "ModuleElement") -> "ModuleElement":
        self._check(other)
        return ModuleElement(self.signature, [x - y for x, y in zip(self.coords, other.coords)])

    def __mul__(self, c: Number) -> "ModuleElement":
        if not isinstance(c, Number):
            return NotImplemented
        return ModuleElement(self.signature, [c * x for x in self.coords])

    __rmul__ = __mul__

    def __matmul__(self, a: AlgElement) -> "ModuleElement":
        """Right module action ``v·a``."""
        return ModuleElement(self.signature, [x @ a for x in self.coords])

    right_mul = __matmul__

    def frobenius(self) -> float:
        return float(np.sqrt(sum(x.frobenius() ** 2 for x in self.coords)))

    def allclose(self, other: "ModuleElement", atol: float = 1e-10) -> bool:
        return (self - other).frobenius() <= atol


class SesquiMap:
    """An A-sesquilinear map on ``A^m``, represented by its Gram matrix."""

    __slots__ = ("gram",)

    def __init__(self, gram: MatrixOverA):
        self.gram = gram

    @classmethod
    def from_flats(cls, signature: CStarSignature, m: int, flats) -> "SesquiMap":
        return cls(MatrixOverA(signature, m, flats))

    @classmethod
    def zero(cls, signature: CStarSignature, m: int) -> "SesquiMap":
        return cls(MatrixOverA.zeros(signature, m))

    @classmethod
    def identity(cls, signature: CStarSignature, m: int) -> "SesquiMap":
        return cls(MatrixOverA.identity(signature, m))

    @property
    def signature(self) -> CStarSignature:
        return self.gram.signature

    @property
    def m(self) -> int:
        return self.gram.m

    @property
    def flats(self) -> tuple[np.ndarray, ...]:
        return self.gram.flats

    def __call__(self, v: ModuleElement, w: ModuleElement) -> AlgElement:
        return sesqui_eval(self, v, w)

    def __add__(self, other: "SesquiMap") -> "SesquiMap":
        return SesquiMap(self.gram + other.gram)

    def __sub__(self, other: "SesquiMap") -> "SesquiMap":
        return SesquiMap(self.gram - other.gram)

    def __mul__(self, c: Number) -> "SesquiMap":
        if not isinstance(c, Number):
            return NotImplemented
        return SesquiMap(c * self.gram)

    __rmul__ = __mul__

    def star_transpose(self) -> "SesquiMap":
        """The map ``(v, w) ↦ s(w, v)*``."""
        return SesquiMap(self.gram.adjoint())

    def frobenius(self) -> float:
        return self.gram.frobenius()


def sesqui_eval(s: SesquiMap, v: ModuleElement, w: ModuleElement) -> AlgElement:
    if v.m != s.m or w.m != s.m:
        raise DimensionMismatch(f"map on A^{s.m} evaluated at elements of A^{v.m}, A^{w.m}")
    if v.signature != s.signature or w.signature != s.signature:
        raise DimensionMismatch("signature mismatch between map and arguments")
    blocks = [v.column(k).conj().T @ f @ w.column(k) for k, f in enumerate(s.flats)]
    return AlgElement(s.signature, blocks)


def sesqui_is_positive(s: SesquiMap, tol: TolerancePolicy = DEFAULT_TOL) -> bool:
    return is_positive_matrix_over_A(s.gram, tol)


def negativity_witness(s: SesquiMap, tol: TolerancePolicy = DEFAULT_TOL) -> ModuleElement | None:
    """A module element ``v`` with ``s(v, v)`` not positive, or ``None``.

    The witness puts the most negative eigenvector of the offending flattened
    block into the first column of that block.
    """
    if sesqui_is_positive(s, tol):
        return None
    skew = [k for k, f in enumerate(s.flats) if not is_hermitian(f, tol)]
    if skew:
        k = skew[0]
        f = s.flats[k]
        eig = hermitian_eig(-0.5j * (f - f.conj().T), tol)
        pick = int(np.argmax(np.abs(eig.eigenvalues)))
        vec = eig.vectors[:, pick]
    else:
        _, k = matrix_over_A_min_eigenvalue(s.gram, tol)
        vec = hermitian_eig(s.flats[k], tol).vectors[:, -1]
    cols = []
    for kk, n in enumerate(s.signature.block_dims):
        c = np.zeros((s.m * n, n), dtype=np.complex128)
        if kk == k:
            c[:, 0] = vec
        cols.append(c)
    return ModuleElement.from_columns(s.signature, s.m, cols)


@dataclass(frozen=True)
class HilbertModule:
    """The Hilbert A-module ``⊕_k C^{r_k x n_k}``."""

    signature: CStarSignature
    ranks: tuple[int, ...]

    def __post_init__(self):
        ranks = tuple(int(r) for r in self.ranks)
        if len(ranks) != self.signature.n_blocks or any(r < 0 for r in ranks):
            raise ShapeMismatch(f"ranks {ranks} do not fit signature {self.signature}")
        object.__setattr__(self, "ranks", ranks)

    @property
    def complex_dim(self) -> int:
        return sum(r * n for r, n in zip(self.ranks, self.signature.block_dims))

    def element(self, blocks) -> "HilbertElement":
        return HilbertElement(self, blocks)

    def zero(self) -> "HilbertElement":
        return HilbertElement(self, [np.zeros((r, n)) for r, n in zip(self.ranks, self.signature.block_dims)])

    def inner(self, t: "HilbertElement", s: "HilbertElement") -> AlgElement:
        return inner_product(self, t, s)


class HilbertElement:
    __slots__ = ("module", "blocks")

    def __init__(self, module: HilbertModule, blocks):
        blocks = tuple(_frozen(b) for b in blocks)
        if len(blocks) != len(module.ranks):
            raise ShapeMismatch(f"expected {len(module.ranks)} blocks, got {len(blocks)}")
        for b, r, n in zip(blocks, module.ranks, module.signature.block_dims):
            if b.shape != (r, n):
                raise ShapeMismatch(f"block of shape {b.shape}, expected {(r, n)}")
        self.module = module
        self.blocks = blocks

    def _check(self, other: "HilbertElement"):
        if other.module != self.module:
            raise ShapeMismatch(f"elements of {self.module} and {other.module}")

    def __add__(self, other: "HilbertElement") -> "HilbertElement":
        self._check(other)
        return HilbertElement(self.module, [x + y for x, y in zip(self.blocks, other.blocks)])

    def __sub__(self, other: "HilbertElement") -> "HilbertElement":
        self._check(other)
        return HilbertElement(self.module, [x - y for x, y in zip(self.blocks, other.blocks)])

    def __mul__(self, c: Number) -> "HilbertElement":
        if not isinstance(c, Number):
            return NotImplemented
        return HilbertElement(self.module, [c * x for x in self.blocks])

    __rmul__ = __mul__

    def __matmul__(self, a: AlgElement) -> "HilbertElement":
        if a.signature != self.module.signature:
            raise SignatureMismatch("algebra element acts on a module over another algebra")
        return HilbertElement(self.module, [x @ y for x, y in zip(self.blocks, a.blocks)])

    right_mul = __matmul__

    def norm(self) -> float:
        return float(np.sqrt(max(inner_product(self.module, self, self).norm(), 0.0)))

    def frobenius(self) -> float:
        return float(np.sqrt(sum(np.linalg.norm(x) ** 2 for x in self.blocks)))


def inner_product(module: HilbertModule, t: HilbertElement, s: HilbertElement) -> AlgElement:
    if t.module != module or s.module != module:
        raise ShapeMismatch("inner product of elements outside the module")
    return AlgElement(module.signature, [x.conj().T @ y for x, y in zip(t.blocks, s.blocks)])


class ModuleMap:
    """An A-linear map ``A^m → M`` given by the images of the free generators.

    Block ``k`` of the map is the ``r_k x (m n_k)`` matrix whose ``j``-th column
    group is block ``k`` of the image of generator ``j``.
    """

    __slots__ = ("codomain", "m", "blocks")

    def __init__(self, codomain: HilbertModule, m: int, blocks):
        blocks = tuple(np.array(b, dtype=np.complex128) for b in blocks)
        for b, r, n in zip(blocks, codomain.ranks, codomain.signature.block_dims):
            if b.shape != (r, m * n):
                raise ShapeMismatch(f"map block {b.shape}, expected {(r, m * n)}")
            b.flags.writeable = False
        if len(blocks) != len(codomain.ranks):
            raise ShapeMismatch("wrong number of blocks")
        self.codomain = codomain
        self.m = int(m)
        self.blocks = blocks

    @classmethod
    def from_generator_images(cls, codomain: HilbertModule, images: Sequence[HilbertElement]) -> "ModuleMap":
        m = len(images)
        blocks = []
        for k, (r, n) in enumerate(zip(codomain.ranks, codomain.signature.block_dims)):
            blocks.append(np.hstack([img.blocks[k] for img in images]) if m else np.zeros((r, 0)))
        return cls(codomain, m, blocks)

    @property
    def signature(self) -> CStarSignature:
        return self.codomain.signature

    def generator_image(self, j: int) -> HilbertElement:
        dims = self.signature.block_dims
        return HilbertElement(self.codomain, [b[:, j * n:(j + 1) * n] for b, n in zip(self.blocks, dims)])

    def __call__(self, v: ModuleElement) -> HilbertElement:
        if v.m != self.m or v.signature != self.signature:
            raise DimensionMismatch("argument is not in the domain A^m of the map")
        return HilbertElement(self.codomain, [b @ v.column(k) for k, b in enumerate(self.blocks)])

    def __add__(self, other: "ModuleMap") -> "ModuleMap":
        return ModuleMap(self.codomain, self.m, [x + y for x, y in zip(self.blocks, other.blocks)])

    def __sub__(self, other: "ModuleMap") -> "ModuleMap":
        return ModuleMap(self.codomain, self.m, [x - y for x, y in zip(self.blocks, other.blocks)])

    def __mul__(self, c: Number) -> "ModuleMap":
        if not isinstance(c, Number):
            return NotImplemented
        return ModuleMap(self.codomain, self.m, [c * x for x in self.blocks])

    __rmul__ = __mul__

    def frobenius(self) -> float:
        return float(np.sqrt(sum(np.linalg.norm(x) ** 2 for x in self.blocks)))


class AdjointableMap:
    """A map ``M → M'`` acting by per-block left multiplication ``T_k ↦ P_k T_k``."""

    __slots__ = ("domain", "codomain", "blocks")

    def __init__(self, domain: HilbertModule, codomain: HilbertModule, blocks):
        if domain.signature != codomain.signature:
            raise SignatureMismatch("adjointable maps preserve the coefficient algebra")
        blocks = tuple(np.array(b, dtype=np.complex128).reshape(rp, r) for b, r, rp in zip(blocks, domain.ranks, codomain.ranks))
        if len(blocks) != len(domain.ranks):
            raise ShapeMismatch("wrong number of blocks")
        for b in blocks:
            b.flags.writeable = False
        self.domain = domain
        self.codomain = codomain
        self.blocks = blocks

    @classmethod
    def identity(cls, module: HilbertModule) -> "AdjointableMap":
        return cls(module, module, [np.eye(r) for r in module.ranks])

    @classmethod
    def zero(cls, domain: HilbertModule, codomain: HilbertModule | None = None) -> "AdjointableMap":
        codomain = codomain or domain
        return cls(domain, codomain, [np.zeros((rp, r)) for r, rp in zip(domain.ranks, codomain.ranks)])

    def __call__(self, t: HilbertElement) -> HilbertElement:
        if t.module != self.domain:
            raise ShapeMismatch("argument outside the domain")
        return HilbertElement(self.codomain, [p @ x for p, x in zip(self.blocks, t.blocks)])

    def adjoint(self) -> "AdjointableMap":
        return AdjointableMap(self.codomain, self.domain, [p.conj().T for p in self.blocks])

    def __matmul__(self, other):
        if isinstance(other, AdjointableMap):
            if other.codomain != self.domain:
                raise ShapeMismatch("composition of incompatible maps")
            return AdjointableMap(other.domain, self.codomain, [p @ q for p, q in zip(self.blocks, other.blocks)])
        if isinstance(other, ModuleMap):
            if other.codomain != self.domain:
                raise ShapeMismatch("composition of incompatible maps")
            return ModuleMap(self.codomain, other.m, [p @ q for p, q in zip(self.blocks, other.blocks)])
        return NotImplemented

    def __add__(self, other: "AdjointableMap") -> "AdjointableMap":
        return AdjointableMap(self.domain, self.codomain, [x + y for x, y in zip(self.blocks, other.blocks)])

    def __sub__(self, other: "AdjointableMap") -> "AdjointableMap":
        return AdjointableMap(self.domain, self.codomain, [x - y for x, y in zip(self.blocks, other.blocks)])

    def __mul__(self, c: Number) -> "AdjointableMap":
        if not isinstance(c, Number):
            return NotImplemented
        return AdjointableMap(self.domain, self.codomain, [c * x for x in self.blocks])

    __rmul__ = __mul__

    def frobenius(self) -> float:
        return float(np.sqrt(sum(np.linalg.norm(x) ** 2 for x in self.blocks)))

    def max_block_norm(self) -> float:
        return max((float(np.linalg.norm(x)) for x in self.blocks), default=0.0)


def degenerate_submodule(cpmap, tol: TolerancePolicy = DEFAULT_TOL) -> list[ModuleElement]:
    """Complex basis of ``{w : E(b)(v, w) = 0 for all b, v}`` inside ``A^m``.

    ``cpmap`` only needs ``signature``, ``m`` and ``values`` (one
    :class:`SesquiMap` per basis element of the domain algebra). In block ``k``
    the condition reads ``S^b_k w_k = 0`` for every basis value, so each column
    of ``w_k`` must lie in the common null space ``N_k``; the basis pairs every
    vector of ``N_k`` with every column position.
    """
    sig, m = cpmap.signature, cpmap.m
    basis = []
    for k, n in enumerate(sig.block_dims):
        stacked = np.vstack([s.flats[k] for s in cpmap.values]) if cpmap.values else np.zeros((0, m * n))
        kernel = null_space(stacked, tol)
        for z in kernel.T:
            for col in range(n):
                cols = [np.zeros((m * d, d), dtype=np.complex128) for d in sig.block_dims]
                cols[k][:, col] = z
                basis.append(ModuleElement.from_columns(sig, m, cols))
    _assert_right_invariant(sig, m, basis, tol)
    return basis


def _flatten(v: ModuleElement) -> np.ndarray:
    return np.concatenate([v.column(k).ravel() for k in range(v.signature.n_blocks)])


def _assert_right_invariant(sig: CStarSignature, m: int, basis: list[ModuleElement], tol: TolerancePolicy):
    if not basis:
        return
    q, _ = np.linalg.qr(np.column_stack([_flatten(v) for v in basis]))
    for v in basis:
        for u in matrix_units(sig):
            x = _flatten(v @ u)
            resid = np.linalg.norm(x - q @ (q.conj().T @ x))
            if resid > tol.residual_tol * max(1.0, float(np.linalg.norm(x))):
                raise AssertionError("degenerate subspace is not closed under the right A-action")
