"""Finite-dimensional C*-algebras ``A = M_{n_1}(C) ⊕ ... ⊕ M_{n_K}(C)``.

Elements are stored as tuples of square complex blocks. Matrices over ``A``
(``M_m(A)``) are stored per block in flattened form: entry ``(i, j)`` of block
``k`` occupies rows ``i*n_k:(i+1)*n_k`` and columns ``j*n_k:(j+1)*n_k`` of an
``(m n_k) x (m n_k)`` complex matrix. Positivity in ``M_m(A)`` is then plain
positive semidefiniteness of every flattened block.
"""
from __future__ import annotations

from dataclasses import dataclass
from numbers import Number
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, ShapeMismatch, SignatureMismatch
from .numkernel import DEFAULT_TOL, TolerancePolicy, as_matrix, hermitian_eig, is_hermitian, psd_check


def _frozen(m) -> np.ndarray:
    arr = as_matrix(m)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class CStarSignature:
    block_dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(n) for n in self.block_dims)
        if not dims:
            raise ValueError("a C*-signature needs at least one block")
        if any(n <= 0 for n in dims):
            raise ValueError(f"block sizes must be positive, got {dims}")
        object.__setattr__(self, "block_dims", dims)

    @property
    def n_blocks(self) -> int:
        return len(self.block_dims)

    @property
    def dim(self) -> int:
        """Complex dimension of the algebra."""
        return sum(n * n for n in self.block_dims)

    def zero(self) -> "AlgElement":
        return AlgElement(self, tuple(np.zeros((n, n)) for n in self.block_dims))

    def identity(self) -> "AlgElement":
        return AlgElement(self, tuple(np.eye(n) for n in self.block_dims))

    def element(self, blocks) -> "AlgElement":
        return AlgElement(self, tuple(blocks))

    def from_vector(self, coords) -> "AlgElement":
        """Inverse of :meth:`AlgElement.to_vector` (matrix-unit coordinates)."""
        coords = np.asarray(coords, dtype=np.complex128)
        if coords.shape != (self.dim,):
            raise DimensionMismatch(f"expected {self.dim} coordinates, got {coords.shape}")
        blocks, start = [], 0
        for n in self.block_dims:
            blocks.append(coords[start:start + n * n].reshape(n, n))
            start += n * n
        return AlgElement(self, tuple(blocks))


class AlgElement:
    """An element of a finite-dimensional C*-algebra.

    ``a @ b`` is the algebra product, ``c * a`` scalar multiplication.
    """

    __slots__ = ("signature", "blocks")

    def __init__(self, signature: CStarSignature, blocks: Sequence):
        blocks = tuple(_frozen(b) for b in blocks)
        if len(blocks) != signature.n_blocks:
            raise ShapeMismatch(f"expected {signature.n_blocks} blocks, got {len(blocks)}")
        for b, n in zip(blocks, signature.block_dims):
            if b.shape != (n, n):
                raise ShapeMismatch(f"block of shape {b.shape} does not fit M_{n}")
        self.signature = signature
        self.blocks = blocks

    def _check(self, other: "AlgElement"):
        if not isinstance(other, AlgElement):
            raise TypeError(f"expected AlgElement, got {type(other).__name__}")
        if other.signature != self.signature:
            raise SignatureMismatch(f"{self.signature} vs {other.signature}")

    def __matmul__(self, other: "AlgElement") -> "AlgElement":
        self._check(other)
        return AlgElement(self.signature, tuple(x @ y for x, y in zip(self.blocks, other.blocks)))

    def __add__(self, other: "AlgElement") -> "AlgElement":
        self._check(other)
        return AlgElement(self.signature, tuple(x + y for x, y in zip(self.blocks, other.blocks)))

    def __sub__(self, other: "AlgElement") -> "AlgElement":
        self._check(other)
        return AlgElement(self.signature, tuple(x - y for x, y in zip(self.blocks, other.blocks)))

    def __neg__(self) -> "AlgElement":
        return AlgElement(self.signature, tuple(-x for x in self.blocks))

    def __mul__(self, c: Number) -> "AlgElement":
        if not isinstance(c, Number):
            return NotImplemented
        return AlgElement(self.signature, tuple(c * x for x in self.blocks))

    __rmul__ = __mul__

    def __truediv__(self, c: Number) -> "AlgElement":
        return self * (1.0 / c)

    def adjoint(self) -> "AlgElement":
        return AlgElement(self.signature, tuple(x.conj().T for x in self.blocks))

    def norm(self) -> float:
        return alg_norm(self)

    def trace(self) -> complex:
        return complex(sum(np.trace(x) for x in self.blocks))

    def frobenius(self) -> float:
        return float(np.sqrt(sum(np.linalg.norm(x) ** 2 for x in self.blocks)))

    def to_vector(self) -> np.ndarray:
        """Coordinates in the matrix-unit basis (block, row, column order)."""
        return np.concatenate([x.ravel() for x in self.blocks])

    def allclose(self, other: "AlgElement", atol: float = 1e-10) -> bool:
        self._check(other)
        return (self - other).frobenius() <= atol

    def __repr__(self):
        return f"AlgElement({self.signature.block_dims}, {[b.tolist() for b in self.blocks]})"


def alg_mul(a: AlgElement, b: AlgElement) -> AlgElement:
    return a @ b


def alg_adjoint(a: AlgElement) -> AlgElement:
    return a.adjoint()


def alg_norm(a: AlgElement, tol: TolerancePolicy = DEFAULT_TOL) -> float:
    """C*-norm: the largest singular value over all blocks."""
    best = 0.0
    for x in a.blocks:
        lam = hermitian_eig(x.conj().T @ x, tol).eigenvalues
        best = max(best, float(np.sqrt(max(lam[0], 0.0))))
    return best


def is_positive_element(a: AlgElement, tol: TolerancePolicy = DEFAULT_TOL) -> bool:
    for x in a.blocks:
        if not is_hermitian(x, tol) or not psd_check(x, tol):
            return False
    return True


class MatrixOverA:
    """An ``m x m`` matrix with entries in ``A``, stored as flattened blocks."""

    __slots__ = ("signature", "m", "flats")

    def __init__(self, signature: CStarSignature, m: int, flats: Sequence):
        flats = tuple(_frozen(f) for f in flats)
        if len(flats) != signature.n_blocks:
            raise ShapeMismatch(f"expected {signature.n_blocks} flattened blocks, got {len(flats)}")
        for f, n in zip(flats, signature.block_dims):
            if f.shape != (m * n, m * n):
                raise ShapeMismatch(f"flattened block {f.shape} does not match m={m}, n={n}")
        self.signature = signature
        self.m = int(m)
        self.flats = flats

    @classmethod
    def from_entries(cls, signature: CStarSignature, entries) -> "MatrixOverA":
        m = len(entries)
        flats = []
        for k, n in enumerate(signature.block_dims):
            flat = np.zeros((m * n, m * n), dtype=np.complex128)
            for i in range(m):
                if len(entries[i]) != m:
                    raise ShapeMismatch("entries table must be square")
                for j in range(m):
                    a = entries[i][j]
                    if a.signature != signature:
                        raise SignatureMismatch(f"entry ({i},{j}) has signature {a.signature}")
                    flat[i * n:(i + 1) * n, j * n:(j + 1) * n] = a.blocks[k]
            flats.append(flat)
        return cls(signature, m, flats)

    @classmethod
    def identity(cls, signature: CStarSignature, m: int) -> "MatrixOverA":
        return cls(signature, m, [np.eye(m * n) for n in signature.block_dims])

    @classmethod
    def zeros(cls, signature: CStarSignature, m: int) -> "MatrixOverA":
        return cls(signature, m, [np.zeros((m * n, m * n)) for n in signature.block_dims])

    @classmethod
    def diagonal(cls, entries: Sequence[AlgElement]) -> "MatrixOverA":
        sig = entries[0].signature
        zero = sig.zero()
        m = len(entries)
        return cls.from_entries(sig, [[entries[i] if i == j else zero for j in range(m)] for i in range(m)])

    def entry(self, i: int, j: int) -> AlgElement:
        blocks = []
        for f, n in zip(self.flats, self.signature.block_dims):
            blocks.append(f[i * n:(i + 1) * n, j * n:(j + 1) * n])
        return AlgElement(self.signature, blocks)

    def entries(self) -> list[list[AlgElement]]:
        return [[self.entry(i, j) for j in range(self.m)] for i in range(self.m)]

    def _check(self, other: "MatrixOverA"):
        if other.signature != self.signature or other.m != self.m:
            raise SignatureMismatch("matrices over A have different shapes")

    def __add__(self, other: "MatrixOverA") -> "MatrixOverA":
        self._check(other)
        return MatrixOverA(self.signature, self.m, [x + y for x, y in zip(self.flats, other.flats)])

    def __sub__(self, other: "MatrixOverA") -> "MatrixOverA":
        self._check(other)
        return MatrixOverA(self.signature, self.m, [x - y for x, y in zip(self.flats, other.flats)])

    def __neg__(self) -> "MatrixOverA":
        return MatrixOverA(self.signature, self.m, [-x for x in self.flats])

    def __mul__(self, c: Number) -> "MatrixOverA":
        if not isinstance(c, Number):
            return NotImplemented
        return MatrixOverA(self.signature, self.m, [c * x for x in self.flats])

    __rmul__ = __mul__

    def __matmul__(self, other: "MatrixOverA") -> "MatrixOverA":
        self._check(other)
        return MatrixOverA(self.signature, self.m, [x @ y for x, y in zip(self.flats, other.flats)])

    def adjoint(self) -> "MatrixOverA":
        return MatrixOverA(self.signature, self.m, [x.conj().T for x in self.flats])

    def entry_sum(self) -> AlgElement:
        """``Σ_ij a_ij``."""
        total = self.signature.zero()
        for row in self.entries():
            for a in row:
                total = total + a
        return total

    def frobenius(self) -> float:
        return float(np.sqrt(sum(np.linalg.norm(f) ** 2 for f in self.flats)))


def is_positive_matrix_over_A(g: MatrixOverA, tol: TolerancePolicy = DEFAULT_TOL) -> bool:
    for f in g.flats:
        if not is_hermitian(f, tol) or not psd_check(f, tol):
            return False
    return True


def matrix_over_A_min_eigenvalue(g: MatrixOverA, tol: TolerancePolicy = DEFAULT_TOL) -> tuple[float, int]:
    """Smallest eigenvalue over all flattened blocks and the block it lives in."""
    best, where = np.inf, -1
    for k, f in enumerate(g.flats):
        if f.size == 0:
            continue
        lam = hermitian_eig(f, tol).eigenvalues[-1]
        if lam < best:
            best, where = float(lam), k
    return (0.0, -1) if where < 0 else (best, where)


def compress(g: MatrixOverA, tup: Sequence[AlgElement]) -> AlgElement:
    """``Σ_ij a_i* g_ij a_j`` for a tuple ``(a_1, ..., a_m)``."""
    if len(tup) != g.m:
        raise DimensionMismatch(f"tuple of length {len(tup)} for a {g.m}x{g.m} matrix")
    for a in tup:
        if a.signature != g.signature:
            raise SignatureMismatch(f"tuple entry has signature {a.signature}")
    blocks = []
    for k, f in enumerate(g.flats):
        col = np.vstack([a.blocks[k] for a in tup])
        blocks.append(col.conj().T @ f @ col)
    return AlgElement(g.signature, blocks)


def compress_test(g: MatrixOverA, tup: Sequence[AlgElement], tol: TolerancePolicy = DEFAULT_TOL) -> bool:
    return is_positive_element(compress(g, tup), tol)


def matrix_units(signature: CStarSignature) -> list[AlgElement]:
    """The matrix units ``E^(k)_ij`` in (block, row, column) order."""
    units = []
    for k, n in enumerate(signature.block_dims):
        for i in range(n):
            for j in range(n):
                blocks = [np.zeros((d, d)) for d in signature.block_dims]
                blocks[k][i, j] = 1.0
                units.append(AlgElement(signature, blocks))
    return units


def unit_labels(signature: CStarSignature) -> list[tuple[int, int, int]]:
    return [(k, i, j) for k, n in enumerate(signature.block_dims) for i in range(n) for j in range(n)]


def unit_index(signature: CStarSignature, k: int, i: int, j: int) -> int:
    offset = sum(n * n for n in signature.block_dims[:k])
    return offset + i * signature.block_dims[k] + j


def _hermitian_function(x: np.ndarray, fn, tol: TolerancePolicy) -> np.ndarray:
    eig = hermitian_eig(x, tol)
    v = eig.vectors
    return (v * fn(eig.eigenvalues)) @ v.conj().T


def four_unitaries(b: AlgElement, tol: TolerancePolicy = DEFAULT_TOL) -> tuple[np.ndarray, tuple[AlgElement, ...]]:
    """Write ``b`` as a linear combination of four unitaries.

    With ``b = h + i k`` (``h``, ``k`` Hermitian) and ``x = s y`` for ``‖y‖ <= 1``,
    ``y = (u + u*)/2`` where ``u = y + i sqrt(1 - y^2)``.
    """
    sig = b.signature
    h = 0.5 * (b + b.adjoint())
    k = (-0.5j) * (b - b.adjoint())
    coeffs, unitaries = [], []
    for part, phase in ((h, 1.0), (k, 1j)):
        s = alg_norm(part, tol)
        if s == 0.0:
            coeffs += [0.0, 0.0]
            unitaries += [sig.identity(), sig.identity()]
            continue
        blocks = []
        for x in part.blocks:
            y = 0.5 * (x + x.conj().T) / s
            root = _hermitian_function(y, lambda lam: np.sqrt(np.clip(1.0 - lam * lam, 0.0, None)), tol)
            blocks.append(y + 1j * root)
        u = AlgElement(sig, blocks)
        coeffs += [phase * s / 2, phase * s / 2]
        unitaries += [u, u.adjoint()]
    return np.array(coeffs, dtype=np.complex128), tuple(unitaries)
