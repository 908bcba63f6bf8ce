import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from opdilate.algebra import CStarSignature, alg_norm, is_positive_element
from opdilate.errors import ShapeMismatch
from opdilate.instances import (
    random_cp_map,
    random_element,
    random_hilbert_element,
    random_module_element,
    random_sesqui,
    random_signature,
    random_unitary,
)
from opdilate.ksgns import CPMapTable, ksgns_dilate
from opdilate.modules import (
    AdjointableMap,
    HilbertModule,
    ModuleElement,
    ModuleMap,
    SesquiMap,
    degenerate_submodule,
    inner_product,
    negativity_witness,
    sesqui_eval,
    sesqui_is_positive,
)
from opdilate.numkernel import DEFAULT_TOL

from oracles import sesqui_loop

seeds = st.integers(0, 2**32 - 1)


def _alg_close(a, b, atol):
    return all(np.max(np.abs(x - y), initial=0.0) <= atol for x, y in zip(a.blocks, b.blocks))


def test_sesqui_identity_example():
    sig = CStarSignature((2, 1))
    s = SesquiMap.identity(sig, 3)
    v = ModuleElement.generator(sig, 3, 0)
    assert sesqui_eval(s, v, v).allclose(sig.identity(), atol=0)


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_sesqui_axioms_and_loop_oracle(seed):
    rng = np.random.default_rng(seed)
    sig = CStarSignature((2,)) if seed % 3 == 0 else random_signature(rng, 2, 3)
    m = 2 if seed % 3 == 0 else int(rng.integers(1, 4))
    s = random_sesqui(sig, m, rng, positive=False)
    v, w = random_module_element(sig, m, rng), random_module_element(sig, m, rng)
    a = random_element(sig, rng)
    val = sesqui_eval(s, v, w)
    scale = max(1.0, val.frobenius() * a.frobenius())
    assert _alg_close(sesqui_eval(s, v @ a, w), a.adjoint() @ val, 1e-10 * scale)
    assert _alg_close(sesqui_eval(s, v, w @ a), val @ a, 1e-10 * scale)
    entries = [[s.gram.entry(i, j).blocks for j in range(m)] for i in range(m)]
    ref = sesqui_loop(entries, [x.blocks for x in v.coords], [x.blocks for x in w.coords])
    for x, y in zip(val.blocks, ref):
        assert np.allclose(x, y, atol=1e-10 * max(1.0, np.linalg.norm(y)))
    assert _alg_close(s.star_transpose()(w, v), val.adjoint(), 1e-10 * max(1.0, val.frobenius()))


def test_sesqui_positivity_examples():
    rng = np.random.default_rng(0)
    sig = CStarSignature((2, 1))
    assert sesqui_is_positive(random_sesqui(sig, 2, rng))
    assert not sesqui_is_positive(SesquiMap.identity(sig, 2) * -1)
    assert sesqui_is_positive(SesquiMap.zero(sig, 2))
    assert negativity_witness(SesquiMap.zero(sig, 2)) is None


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_positive_sesqui_gives_positive_values(seed):
    rng = np.random.default_rng(seed)
    sig = random_signature(rng, 2, 3)
    m = int(rng.integers(1, 3))
    s = random_sesqui(sig, m, rng, rank=int(rng.integers(1, 4)))
    assert sesqui_is_positive(s)
    for _ in range(3):
        v = random_module_element(sig, m, rng)
        assert is_positive_element(sesqui_eval(s, v, v))


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_negative_sesqui_has_witness(seed):
    rng = np.random.default_rng(seed)
    sig = random_signature(rng, 2, 3)
    m = int(rng.integers(1, 3))
    s = random_sesqui(sig, m, rng, rank=1)
    k = int(rng.integers(0, sig.n_blocks))
    flats = [f.copy() for f in s.flats]
    flats[k] = flats[k] - (np.linalg.norm(flats[k], 2) + 0.5) * np.eye(flats[k].shape[0]) * rng.uniform(0.2, 1)
    t = SesquiMap.from_flats(sig, m, flats)
    if sesqui_is_positive(t):
        return
    v = negativity_witness(t)
    val = sesqui_eval(t, v, v)
    lam = min(np.linalg.eigvalsh(b)[0] for b in val.blocks)
    assert lam < -DEFAULT_TOL.psd_tol


def test_witness_for_non_hermitian():
    sig = CStarSignature((1,))
    s = SesquiMap.from_flats(sig, 2, [np.array([[0, 1], [0, 0]], dtype=complex)])
    assert not sesqui_is_positive(s)
    v = negativity_witness(s)
    assert not is_positive_element(sesqui_eval(s, v, v))


def test_module_axioms():
    rng = np.random.default_rng(1)
    sig = CStarSignature((2, 1))
    u, v, w = (random_module_element(sig, 3, rng) for _ in range(3))
    a, b = random_element(sig, rng), random_element(sig, rng)
    c = 0.3 - 1.2j
    assert ((u + v) + w).allclose(u + (v + w), atol=1e-12)
    assert ((u + v) @ a).allclose(u @ a + v @ a, atol=1e-12)
    assert (u @ (a + b)).allclose(u @ a + u @ b, atol=1e-12)
    assert ((u @ a) @ b).allclose(u @ (a @ b), atol=1e-12)
    assert (u @ sig.identity()).allclose(u, atol=0)
    assert ((u * c) @ a).allclose(u @ (a * c), atol=1e-12)
    assert (u - u).allclose(ModuleElement.zero(sig, 3), atol=0)


def test_inner_product_examples():
    rng = np.random.default_rng(2)
    sig = CStarSignature((2, 3))
    mod = HilbertModule(sig, (4, 3))
    t = mod.element([random_unitary(4, rng)[:, :2], random_unitary(3, rng)])
    assert inner_product(mod, t, t).allclose(sig.identity(), atol=1e-12)
    s = random_hilbert_element(mod, rng)
    a = random_element(sig, rng)
    assert inner_product(mod, t, s @ a).allclose(inner_product(mod, t, s) @ a, atol=1e-12)
    assert inner_product(mod, s @ a, t).allclose(a.adjoint() @ inner_product(mod, s, t), atol=1e-12)
    assert inner_product(mod, s, t).allclose(inner_product(mod, t, s).adjoint(), atol=1e-12)
    assert is_positive_element(inner_product(mod, s, s))
    with pytest.raises(ValueError):
        mod.element([np.zeros((4, 2)), np.zeros((2, 3))])


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_cauchy_schwarz(seed):
    rng = np.random.default_rng(seed)
    sig = random_signature(rng, 2, 3)
    mod = HilbertModule(sig, tuple(int(r) for r in rng.integers(0, 4, sig.n_blocks)))
    v, w = random_hilbert_element(mod, rng), random_hilbert_element(mod, rng)
    vv, ww, vw = mod.inner(v, v), mod.inner(w, w), mod.inner(v, w)
    gap = vv * alg_norm(ww) - vw @ vw.adjoint()
    scale = max(1.0, alg_norm(ww) * alg_norm(vv))
    assert is_positive_element(gap)
    assert min(np.linalg.eigvalsh(b)[0] for b in gap.blocks) >= -1e-9 * scale


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_module_map_linearity(seed):
    rng = np.random.default_rng(seed)
    sig = random_signature(rng, 2, 2)
    m = int(rng.integers(1, 3))
    mod = HilbertModule(sig, tuple(int(r) for r in rng.integers(1, 4, sig.n_blocks)))
    f = ModuleMap.from_generator_images(mod, [random_hilbert_element(mod, rng) for _ in range(m)])
    v = random_module_element(sig, m, rng)
    a = random_element(sig, rng)
    lhs, rhs = f(v @ a), f(v) @ a
    assert all(np.allclose(x, y, atol=1e-10 * max(1.0, np.linalg.norm(y))) for x, y in zip(lhs.blocks, rhs.blocks))
    for j in range(m):
        img = f(ModuleElement.generator(sig, m, j))
        assert all(np.allclose(x, y) for x, y in zip(img.blocks, f.generator_image(j).blocks))


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_adjointable(seed):
    rng = np.random.default_rng(seed)
    sig = random_signature(rng, 2, 2)
    mod = HilbertModule(sig, tuple(int(r) for r in rng.integers(1, 4, sig.n_blocks)))
    cod = HilbertModule(sig, tuple(int(r) for r in rng.integers(1, 4, sig.n_blocks)))
    p = AdjointableMap(mod, cod, [rng.standard_normal((r2, r1)) + 1j * rng.standard_normal((r2, r1)) for r1, r2 in zip(mod.ranks, cod.ranks)])
    t, s = random_hilbert_element(cod, rng), random_hilbert_element(mod, rng)
    lhs = mod.inner(p.adjoint()(t), s)
    rhs = cod.inner(t, p(s))
    assert _alg_close(lhs, rhs, 1e-10 * max(1.0, rhs.frobenius()))
    assert (p.adjoint().adjoint() - p).frobenius() == 0


def test_adjointable_composition_checks():
    sig = CStarSignature((2,))
    a, b = HilbertModule(sig, (2,)), HilbertModule(sig, (3,))
    with pytest.raises(ShapeMismatch):
        AdjointableMap.identity(a) @ AdjointableMap.identity(b)


def test_degenerate_zero_map():
    sig = CStarSignature((2, 1))
    E = CPMapTable(sig, sig, 2, [SesquiMap.zero(sig, 2)] * sig.dim)
    basis = degenerate_submodule(E)
    assert len(basis) == 2 * (4 + 1)


def test_degenerate_identity_gram():
    sig = CStarSignature((2,))
    E = CPMapTable(sig, sig, 2, [SesquiMap.identity(sig, 2)] * sig.dim, check=False)
    assert degenerate_submodule(E) == []


def test_degenerate_quotient_matches_dilation():
    rng = np.random.default_rng(3)
    dom, sig, m = CStarSignature((2,)), CStarSignature((1, 2)), 3
    E0 = random_cp_map(dom, sig, m - 1, rng, max_terms=2)
    # pad with an extra generator on which everything vanishes
    values = []
    for s in E0.values:
        flats = []
        for f, n in zip(s.flats, sig.block_dims):
            g = np.zeros((m * n, m * n), dtype=np.complex128)
            g[: (m - 1) * n, : (m - 1) * n] = f
            flats.append(g)
        values.append(SesquiMap.from_flats(sig, m, flats))
    E = CPMapTable(dom, sig, m, values)
    # mix the coordinates with a unitary of A^m so the degenerate part is not aligned
    u = [random_unitary(m * n, rng) for n in sig.block_dims]
    E = CPMapTable(dom, sig, m, [SesquiMap.from_flats(sig, m, [q.conj().T @ f @ q for q, f in zip(u, s.flats)]) for s in E.values])
    basis = degenerate_submodule(E)
    assert len(basis) >= sum(n * n for n in sig.block_dims)
    for v in basis:
        for s in E.values:
            w = random_module_element(sig, m, rng)
            assert s(w, v).frobenius() <= 1e-8 * max(1.0, s.frobenius() * w.frobenius())
    assert ksgns_dilate(E).ranks == ksgns_dilate(E0).ranks
