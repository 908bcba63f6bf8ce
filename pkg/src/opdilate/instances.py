"""Random and standard instances for tests, demos and the acceptance suite."""
from __future__ import annotations

import numpy as np

from .algebra import AlgElement, CStarSignature, MatrixOverA
from .kolmogorov import Kernel
from .ksgns import CPMapTable
from .measures import FiniteMeasurableSpace, SesquiMeasure
from .modules import HilbertElement, HilbertModule, ModuleElement, SesquiMap


def _cgauss(rng: np.random.Generator, *shape) -> np.ndarray:
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_signature(rng: np.random.Generator, max_blocks: int = 2, max_size: int = 2) -> CStarSignature:
    k = int(rng.integers(1, max_blocks + 1))
    return CStarSignature(tuple(int(n) for n in rng.integers(1, max_size + 1, size=k)))


def random_element(sig: CStarSignature, rng: np.random.Generator) -> AlgElement:
    return AlgElement(sig, [_cgauss(rng, n, n) for n in sig.block_dims])


def random_module_element(sig: CStarSignature, m: int, rng: np.random.Generator) -> ModuleElement:
    return ModuleElement(sig, [random_element(sig, rng) for _ in range(m)])


def random_hilbert_element(module: HilbertModule, rng: np.random.Generator) -> HilbertElement:
    dims = module.signature.block_dims
    return module.element([_cgauss(rng, r, n) for r, n in zip(module.ranks, dims)])


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(_cgauss(rng, n, n))
    d = np.diag(r)
    return q * (d / np.abs(d))


def takesaki_matrix(sig: CStarSignature, m: int, terms: int, rng: np.random.Generator) -> MatrixOverA:
    """``Σ_t (a^t_i* a^t_j)_ij`` for random tuples ``a^t``."""
    flats = []
    for n in sig.block_dims:
        f = np.zeros((m * n, m * n), dtype=np.complex128)
        for _ in range(terms):
            col = _cgauss(rng, n, m * n)
            f += col.conj().T @ col
        flats.append(f)
    return MatrixOverA(sig, m, flats)


def random_sesqui(sig: CStarSignature, m: int, rng: np.random.Generator, positive: bool = True, rank: int | None = None) -> SesquiMap:
    flats = []
    for n in sig.block_dims:
        if positive:
            r = m * n if rank is None else rank
            x = _cgauss(rng, r, m * n)
            flats.append(x.conj().T @ x)
        else:
            x = _cgauss(rng, m * n, m * n)
            flats.append(x)
    return SesquiMap.from_flats(sig, m, flats)


def random_kernel(
    sig: CStarSignature, m: int, n_points: int, rng: np.random.Generator, ranks=None
) -> tuple[Kernel, list[np.ndarray]]:
    """Kernel ``K(x, y) = D(x)* D(y)`` from random generator images.

    Returns the kernel and the per-block image matrices used to build it.
    """
    factors = []
    flats = []
    for k, n in enumerate(sig.block_dims):
        size = n_points * m * n
        r = int(rng.integers(1, size + 1)) if ranks is None else ranks[k]
        f = _cgauss(rng, r, size)
        factors.append(f)
        flats.append(f.conj().T @ f)
    points = list(range(n_points))
    return Kernel.from_gram(sig, m, points, MatrixOverA(sig, n_points * m, flats)), factors


def random_cp_map(
    domain: CStarSignature, sig: CStarSignature, m: int, rng: np.random.Generator, max_terms: int = 3
) -> CPMapTable:
    """``E(b)_k = Σ_{l,t} W_{klt}* b_l W_{klt}`` in every block ``k`` of ``A``."""
    # Kraus terms are drawn per (A-block, B-block) pair.
    kraus = {}
    for k, n in enumerate(sig.block_dims):
        for l, p in enumerate(domain.block_dims):
            kraus[(k, l)] = [_cgauss(rng, p, m * n) for _ in range(int(rng.integers(0, max_terms + 1)))]

    def value(u: AlgElement) -> SesquiMap:
        flats = []
        for k, n in enumerate(sig.block_dims):
            f = np.zeros((m * n, m * n), dtype=np.complex128)
            for l in range(domain.n_blocks):
                for w in kraus[(k, l)]:
                    f += w.conj().T @ u.blocks[l] @ w
            flats.append(f)
        return SesquiMap.from_flats(sig, m, flats)

    return CPMapTable.from_function(domain, sig, m, value)


def random_positive_measure(
    sig: CStarSignature, m: int, n_atoms: int, rng: np.random.Generator
) -> SesquiMeasure:
    space = FiniteMeasurableSpace(tuple(f"x{i}" for i in range(n_atoms)))
    values = {}
    for x in space.atoms:
        rank = int(rng.integers(0, m * max(sig.block_dims) + 1))
        flats = []
        for n in sig.block_dims:
            r = min(rank, m * n)
            w = _cgauss(rng, r, m * n)
            flats.append(w.conj().T @ w)
        values[x] = SesquiMap.from_flats(sig, m, flats)
    return SesquiMeasure(space, sig, m, values)


def identity_channel(n: int = 2) -> CPMapTable:
    sig = CStarSignature((n,))
    return CPMapTable.from_channel(sig, sig, lambda b: b)


def transpose_channel(n: int = 2) -> CPMapTable:
    sig = CStarSignature((n,))
    return CPMapTable.from_channel(sig, sig, lambda b: AlgElement(sig, [b.blocks[0].T]))


def depolarizing_channel(p: float, n: int = 2) -> CPMapTable:
    sig = CStarSignature((n,))

    def channel(b: AlgElement) -> AlgElement:
        x = b.blocks[0]
        return AlgElement(sig, [(1 - p) * x + (p / n) * np.trace(x) * np.eye(n)])

    return CPMapTable.from_channel(sig, sig, channel)


def zero_map(domain: CStarSignature, sig: CStarSignature, m: int = 1) -> CPMapTable:
    return CPMapTable(domain, sig, m, [SesquiMap.zero(sig, m)] * domain.dim)


def qubit_effect(matrix) -> SesquiMap:
    """A scalar-coefficient effect on ``C^d`` (``A = C``, ``m = d``)."""
    matrix = np.asarray(matrix, dtype=np.complex128)
    return SesquiMap.from_flats(CStarSignature((1,)), matrix.shape[0], [matrix])


def trine_povm() -> list[SesquiMap]:
    effects = []
    for k in range(3):
        psi = np.array([1.0, np.exp(2j * np.pi * k / 3)]) / np.sqrt(2)
        effects.append(qubit_effect((2.0 / 3.0) * np.outer(psi, psi.conj())))
    return effects
