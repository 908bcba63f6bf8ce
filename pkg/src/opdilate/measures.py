"""Sesquilinear-map valued measures on finite measurable spaces.

The sigma-algebra is always the power set, so a measure is its list of atom
values and countable additivity is plain finite summation. Scalar companions
``μ_ij`` are taken as traces of the Gram entries ``E({x})_ij``.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Hashable, Iterable, Mapping

import numpy as np

from .algebra import AlgElement, CStarSignature
from .errors import NotCompletelyPositive, NotDominating, NotPositive, SignatureMismatch, UnknownAtom
from .ksgns import CPMapTable, Dilation, is_completely_positive, ksgns_dilate
from .modules import SesquiMap, sesqui_is_positive
from .numkernel import DEFAULT_TOL, TolerancePolicy


@dataclass(frozen=True)
class FiniteMeasurableSpace:
    atoms: tuple

    def __post_init__(self):
        atoms = tuple(self.atoms)
        if not atoms:
            raise ValueError("a measurable space needs at least one atom")
        if len(set(atoms)) != len(atoms):
            raise ValueError("atom labels must be distinct")
        object.__setattr__(self, "atoms", atoms)

    def __len__(self):
        return len(self.atoms)

    def subset(self, X: Iterable[Hashable]) -> tuple:
        X = tuple(X)
        known = set(self.atoms)
        for x in X:
            if x not in known:
                raise UnknownAtom(x)
        return X

    def subsets(self):
        """All ``2^|Ω|`` subsets, smallest first."""
        for r in range(len(self.atoms) + 1):
            yield from combinations(self.atoms, r)


class ComplexMeasure:
    __slots__ = ("space", "values")

    def __init__(self, space: FiniteMeasurableSpace, values: Mapping[Hashable, complex]):
        vals = {}
        for x in space.atoms:
            c = complex(values.get(x, 0.0))
            if not np.isfinite(c):
                raise ValueError(f"non-finite value at atom {x!r}")
            vals[x] = c
        for x in values:
            if x not in vals:
                raise UnknownAtom(x)
        self.space = space
        self.values = vals

    def __call__(self, X: Iterable[Hashable]) -> complex:
        return sum((self.values[x] for x in self.space.subset(X)), 0j)

    def atom(self, x) -> complex:
        if x not in self.values:
            raise UnknownAtom(x)
        return self.values[x]


class SesquiMeasure:
    """``X ↦ E(X) = Σ_{x ∈ X} E({x})`` with values in ``S_A(A^m)``."""

    __slots__ = ("space", "signature", "m", "atom_values")

    def __init__(
        self,
        space: FiniteMeasurableSpace,
        signature: CStarSignature,
        m: int,
        atom_values: Mapping[Hashable, SesquiMap],
    ):
        vals = {}
        for x in space.atoms:
            s = atom_values.get(x, SesquiMap.zero(signature, m))
            if s.signature != signature or s.m != m:
                raise SignatureMismatch(f"value at atom {x!r} lives on a different module")
            vals[x] = s
        for x in atom_values:
            if x not in vals:
                raise UnknownAtom(x)
        self.space = space
        self.signature = signature
        self.m = int(m)
        self.atom_values = vals

    def __call__(self, X: Iterable[Hashable]) -> SesquiMap:
        return measure_eval(self, X)


def measure_eval(E: SesquiMeasure, X: Iterable[Hashable]) -> SesquiMap:
    total = SesquiMap.zero(E.signature, E.m)
    for x in E.space.subset(X):
        total = total + E.atom_values[x]
    return total


def integrate(E: SesquiMeasure, f: Mapping[Hashable, complex] | Callable[[Hashable], complex]) -> SesquiMap:
    """``∫ f dE`` for a function on the atoms (mapping or callable)."""
    fn = f if callable(f) else (lambda x: f.get(x, 0.0))
    total = SesquiMap.zero(E.signature, E.m)
    for x in E.space.atoms:
        c = complex(fn(x))
        if c != 0:
            total = total + c * E.atom_values[x]
    return total


def total_variation(mu: ComplexMeasure) -> ComplexMeasure:
    return ComplexMeasure(mu.space, {x: abs(c) for x, c in mu.values.items()})


def component(E: SesquiMeasure, i: int, j: int) -> dict:
    """The operator measure ``E_ij`` as atom → Gram entry ``(i, j)``."""
    return {x: s.gram.entry(i, j) for x, s in E.atom_values.items()}


def scalarize(E: SesquiMeasure) -> dict[tuple[int, int], ComplexMeasure]:
    out = {}
    for i in range(E.m):
        for j in range(E.m):
            out[(i, j)] = ComplexMeasure(E.space, {x: a.trace() for x, a in component(E, i, j).items()})
    return out


def default_weights(m: int) -> np.ndarray:
    """``p_ij = 2^-(i+j)`` with 1-based indices."""
    idx = np.arange(1, m + 1)
    return 2.0 ** -(idx[:, None] + idx[None, :])


def dominating_measure(E: SesquiMeasure, weights=None) -> ComplexMeasure:
    """``Σ_ij p_ij |μ_ij|`` for strictly positive weights ``p``."""
    p = default_weights(E.m) if weights is None else np.asarray(weights, dtype=float)
    if p.shape != (E.m, E.m) or not np.all(p > 0) or not np.all(np.isfinite(p)):
        raise ValueError(f"weights must be a positive {E.m}x{E.m} array")
    scalars = scalarize(E)
    vals = {x: 0.0 for x in E.space.atoms}
    for (i, j), mu in scalars.items():
        tv = total_variation(mu)
        for x in E.space.atoms:
            vals[x] += p[i, j] * tv.values[x].real
    dom = ComplexMeasure(E.space, vals)
    for mu in scalars.values():
        for x in E.space.atoms:
            if dom.values[x] == 0 and mu.values[x] != 0:
                raise AssertionError(f"μ is not absolutely continuous at atom {x!r}")
    return dom


def density(E: SesquiMeasure, dominating: ComplexMeasure) -> dict:
    """Atomwise Radon-Nikodym density ``C(x) = E({x}) / μ({x})``.

    Raises
    ------
    NotDominating
        If some atom has zero dominating mass but a nonzero value.
    """
    out = {}
    for x in E.space.atoms:
        w = dominating.atom(x)
        if w.imag != 0 or w.real < 0:
            raise ValueError(f"dominating measure must be positive, got {w} at {x!r}")
        s = E.atom_values[x]
        if w.real > 0:
            out[x] = (1.0 / w.real) * s
        elif s.frobenius() != 0:
            raise NotDominating(f"atom {x!r} has zero dominating mass but E({{x}}) ≠ 0")
        else:
            out[x] = SesquiMap.zero(E.signature, E.m)
    return out


def reconstruct_from_density(E: SesquiMeasure, dens: Mapping, dominating: ComplexMeasure, X) -> SesquiMap:
    total = SesquiMap.zero(E.signature, E.m)
    for x in E.space.subset(X):
        total = total + dominating.atom(x).real * dens[x]
    return total


def is_positive_commutative(table: Mapping[Hashable, SesquiMap], tol: TolerancePolicy = DEFAULT_TOL) -> bool:
    return all(sesqui_is_positive(s, tol) for s in table.values())


def measure_to_cpmap(E: SesquiMeasure, tol: TolerancePolicy = DEFAULT_TOL) -> CPMapTable:
    """The map ``C^|Ω| → S_A(A^m)`` with ``χ_{x} ↦ E({x})``.

    Positivity on atoms already forces complete positivity; the returned table
    is checked for it and a failure raises ``NotCompletelyPositive``.
    """
    if not is_positive_commutative(E.atom_values, tol):
        raise NotPositive("some atom value is not positive")
    domain = CStarSignature((1,) * len(E.space))
    table = CPMapTable(domain, E.signature, E.m, [E.atom_values[x] for x in E.space.atoms], tol)
    if not is_completely_positive(table, tol):
        raise NotCompletelyPositive("atomically positive measure failed the Choi-Gram test")
    return table


def indicator(E: SesquiMeasure, X) -> AlgElement:
    """``χ_X`` as an element of ``C^|Ω|``."""
    X = set(E.space.subset(X))
    domain = CStarSignature((1,) * len(E.space))
    return AlgElement(domain, [np.array([[1.0 if x in X else 0.0]]) for x in E.space.atoms])


def dilate_measure(
    E: SesquiMeasure, tol: TolerancePolicy = DEFAULT_TOL, trials: int = 20, rng=0
) -> Dilation:
    return ksgns_dilate(measure_to_cpmap(E, tol), tol, trials, rng)


def subset_residuals(E: SesquiMeasure, d: Dilation) -> dict[tuple, float]:
    """Relative ``‖E(X) − J* π(χ_X) J‖`` for every subset ``X``."""
    out = {}
    for X in E.space.subsets():
        target = measure_eval(E, X)
        p = d.pi_of(indicator(E, X))
        err = 0.0
        for jk, pk, f in zip(d.J.blocks, p.blocks, target.flats):
            diff = float(np.linalg.norm(jk.conj().T @ pk @ jk - f))
            err = max(err, diff / max(1.0, float(np.linalg.norm(f))))
        out[X] = err
    return out
