"""Reference computations that share no code with the package."""
from __future__ import annotations

from fractions import Fraction
from itertools import product

import numpy as np


def _gauss(z) -> tuple[Fraction, Fraction]:
    z = complex(z)
    re, im = Fraction(z.real), Fraction(z.imag)
    return re, im


def _mul(a, b):
    return a[0] * b[0] - a[1] * b[1], a[0] * b[1] + a[1] * b[0]


def _sub(a, b):
    return a[0] - b[0], a[1] - b[1]


def _inv(a):
    d = a[0] * a[0] + a[1] * a[1]
    return a[0] / d, -a[1] / d


def exact_rank(m) -> int:
    """Rank over Q(i) by column-pivot Gaussian elimination on exact fractions.

    Entries must be exactly representable as floats (Gaussian integers or
    dyadic rationals); they are converted without rounding.
    """
    rows = [[_gauss(z) for z in row] for row in np.asarray(m)]
    if not rows:
        return 0
    n_rows, n_cols = len(rows), len(rows[0])
    rank = 0
    for col in range(n_cols):
        pivot = next((r for r in range(rank, n_rows) if rows[r][col] != (0, 0)), None)
        if pivot is None:
            continue
        rows[rank], rows[pivot] = rows[pivot], rows[rank]
        inv = _inv(rows[rank][col])
        for r in range(rank + 1, n_rows):
            if rows[r][col] == (0, 0):
                continue
            f = _mul(rows[r][col], inv)
            rows[r] = [_sub(x, _mul(f, y)) for x, y in zip(rows[r], rows[rank])]
        rank += 1
        if rank == n_rows:
            break
    return rank


def exact_gram(f) -> np.ndarray:
    """``F* F`` for a Gaussian-integer matrix, computed in Python integers."""
    f = np.asarray(f)
    cols = f.shape[1]
    out = np.zeros((cols, cols), dtype=np.complex128)
    for i, j in product(range(cols), repeat=2):
        s = 0
        for r in range(f.shape[0]):
            a, b = complex(f[r, i]), complex(f[r, j])
            s += complex(int(a.real), -int(a.imag)) * complex(int(b.real), int(b.imag))
        out[i, j] = s
    return out


def eigvalsh(m) -> np.ndarray:
    """LAPACK eigenvalues in descending order."""
    return np.linalg.eigvalsh(np.asarray(m))[::-1]


def set_partitions(items):
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]
        yield [[first]] + part


def total_variation_bruteforce(values: dict, X) -> float:
    """``sup Σ |μ(X_i)|`` over all partitions of ``X``."""
    best = 0.0
    for part in set_partitions(list(X)):
        best = max(best, sum(abs(sum(values[x] for x in block)) for block in part))
    return best


def matrix_over_A_product(a, b):
    """Entry-wise ``(ab)_ij = Σ_l a_il b_lj`` on nested lists of block lists."""
    m = len(a)
    out = []
    for i in range(m):
        row = []
        for j in range(m):
            acc = [np.zeros_like(x, dtype=np.complex128) for x in a[0][0]]
            for l in range(m):
                for k in range(len(acc)):
                    acc[k] = acc[k] + a[i][l][k] @ b[l][j][k]
            row.append(acc)
        out.append(row)
    return out


def sesqui_loop(entries, v, w):
    """``Σ_ij v_i* S_ij w_j`` with ``entries[i][j]`` and ``v[i]`` as block lists."""
    m = len(entries)
    acc = [np.zeros_like(x, dtype=np.complex128) for x in v[0]]
    for i in range(m):
        for j in range(m):
            for k in range(len(acc)):
                acc[k] = acc[k] + v[i][k].conj().T @ entries[i][j][k] @ w[j][k]
    return acc


def apply_linear(values, coeffs):
    """``Σ_u c_u E(u)`` by an explicit Python loop over the coefficient list."""
    total = None
    for c, val in zip(coeffs, values):
        term = [c * f for f in val]
        total = term if total is None else [x + y for x, y in zip(total, term)]
    return total
