"""Command-line front end.

    opdilate check   PATH [--tol T] [--seed S] [--out REPORT]
    opdilate dilate  PATH --out RESULT [--tol T] [--seed S]
    opdilate density PATH --out RESULT [--weights W]
    opdilate verify  INSTANCE RESULT

Exit codes: 0 positive / all clauses pass, 1 not positive or a clause fails,
2 malformed input or digest mismatch, 3 residuals exceeded.
"""
from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .algebra import CStarSignature, matrix_over_A_min_eigenvalue, matrix_units
from .errors import (
    DilationError,
    NotCompletelyPositive,
    NotDominating,
    NotHermitian,
    NotPositive,
    NotPositiveDefinite,
    NotPositiveEffect,
    NoConvergence,
    NotPSD,
    ResidualExceeded,
)
from .kolmogorov import KolmogorovDecomposition, assemble_gram, decompose, kernel_is_positive_definite, verify_decomposition
from .ksgns import CPMapTable, Dilation, amplification_check, cp_witness, is_completely_positive, ksgns_dilate, naimark, verify_dilation
from .measures import (
    ComplexMeasure,
    dominating_measure,
    density,
    is_positive_commutative,
    measure_to_cpmap,
    reconstruct_from_density,
    subset_residuals,
)
from .modules import AdjointableMap, HilbertModule, ModuleMap, SesquiMap, sesqui_is_positive
from .numkernel import TolerancePolicy, hermiticity_error, min_eigenvalue
from .serialize import (
    MalformedInput,
    decode_matrix,
    dumps,
    encode_matrix,
    encode_sesqui,
    load_json,
    parse_instance,
    validate,
)

OK, FAIL, MALFORMED, RESIDUAL = 0, 1, 2, 3
REPORT_TOL = 1e-12  # re-verified residuals must match the stored ones this closely

_NEGATIVE = (NotCompletelyPositive, NotPositiveDefinite, NotPositive, NotPositiveEffect, NotPSD, NotHermitian)


class _Out:
    def __init__(self):
        self.lines: list[str] = []

    def __call__(self, msg: str = "") -> None:
        self.lines.append(msg)

    def text(self) -> str:
        return "\n".join(self.lines)


def _load(path, tol_override):
    return parse_instance(load_json(path), tol_override)


def _as_cpmap(inst) -> CPMapTable:
    if inst.kind == "cpmap":
        return inst.payload
    if inst.kind == "povm":
        domain = CStarSignature((1,) * len(inst.payload))
        return CPMapTable(domain, inst.signature, inst.m, inst.payload, inst.tol)
    return measure_to_cpmap(inst.payload, inst.tol)


# check

def _check_instance(inst, seed: int, say) -> tuple[int, dict]:
    tol = inst.tol
    if inst.kind == "kernel":
        gram = assemble_gram(inst.payload)
        herm = max(hermiticity_error(f) for f in gram.flats)
        if not kernel_is_positive_definite(inst.payload, tol):
            try:
                lam, blk = matrix_over_A_min_eigenvalue(gram, tol)
            except NotHermitian:
                say(f"kernel: NOT positive definite (Gram is not Hermitian, ‖G − G*‖ = {herm:.3e})")
                return FAIL, {"positive": False, "hermiticity_error": herm}
            say(f"kernel: NOT positive definite; witness eigenvalue {lam!r} in block {blk}")
            return FAIL, {"positive": False, "witness": {"eigenvalue": lam, "block": blk}}
        lam, blk = matrix_over_A_min_eigenvalue(gram, tol)
        say(f"kernel: positive definite (min Gram eigenvalue {lam!r})")
        return OK, {"positive": True, "min_eigenvalue": lam}

    if inst.kind == "cpmap":
        E = inst.payload
        lam, blk = cp_witness(E, tol)
        if not is_completely_positive(E, tol):
            say(f"cpmap: NOT completely positive; Choi witness eigenvalue {lam!r} in block {blk}")
            return FAIL, {"positive": False, "witness": {"eigenvalue": lam, "block": blk}}
        survived = amplification_check(E, 2, 8, tol, np.random.default_rng(seed))
        say(f"cpmap: completely positive (min Choi eigenvalue {lam!r})")
        say(f"  sampled 2-amplification (seed {seed}): {'no witness' if survived else 'WITNESS FOUND'}")
        return OK, {"positive": True, "min_eigenvalue": lam}

    if inst.kind == "povm":
        worst, where = np.inf, -1
        for idx, s in enumerate(inst.payload):
            if hermiticity_error_of(s) > tol.hermiticity_tol * max(1.0, s.frobenius()):
                say(f"povm: effect {idx} is NOT Hermitian")
                return FAIL, {"positive": False, "effect": idx}
            lam = min(min_eigenvalue(f, tol) for f in s.flats)
            if lam < worst:
                worst, where = lam, idx
        total = inst.payload[0]
        for s in inst.payload[1:]:
            total = total + s
        gap = (total - SesquiMap.identity(inst.signature, inst.m)).frobenius()
        if not all(sesqui_is_positive(s, tol) for s in inst.payload):
            say(f"povm: NOT positive; effect {where} has eigenvalue {worst!r}")
            return FAIL, {"positive": False, "witness": {"eigenvalue": worst, "effect": where}}
        say(f"povm: all {len(inst.payload)} effects positive (min eigenvalue {worst!r}); ‖Σ E_i − 1‖ = {gap:.3e}")
        return OK, {"positive": True, "min_eigenvalue": worst, "normalization_gap": gap}

    E = inst.payload
    worst, where = np.inf, None
    for x, s in E.atom_values.items():
        if hermiticity_error_of(s) > tol.hermiticity_tol * max(1.0, s.frobenius()):
            say(f"measure: value at atom {x!r} is NOT Hermitian")
            return FAIL, {"positive": False, "atom": x}
        lam = min(min_eigenvalue(f, tol) for f in s.flats)
        if lam < worst:
            worst, where = lam, x
    if not is_positive_commutative(E.atom_values, tol):
        say(f"measure: NOT positive; atom {where!r} has eigenvalue {worst!r}")
        return FAIL, {"positive": False, "witness": {"eigenvalue": worst, "atom": where}}
    say(f"measure: positive on all {len(E.space)} atoms (min eigenvalue {worst!r})")
    return OK, {"positive": True, "min_eigenvalue": worst}


def hermiticity_error_of(s: SesquiMap) -> float:
    return max(hermiticity_error(f) for f in s.flats)


def _check_one(path, tol_override, seed) -> tuple[int, str, dict]:
    say = _Out()
    try:
        inst = _load(path, tol_override)
        code, info = _check_instance(inst, seed, say)
    except NotHermitian as exc:
        say(f"cpmap: NOT completely positive (table is not Hermitian: {exc})")
        code, info = FAIL, {"positive": False, "error": str(exc)}
    except (MalformedInput, DilationError, ValueError, KeyError) as exc:
        say(f"malformed input: {exc}")
        code, info = MALFORMED, {"error": str(exc)}
    return code, say.text(), info


def cmd_check(path, tol=None, seed=0, out=None) -> int:
    path = Path(path)
    files = sorted(path.glob("*.json")) if path.is_dir() else [path]
    if not files:
        print(f"{path}: no instance files", file=sys.stderr)
        return MALFORMED
    with ThreadPoolExecutor() as pool:
        results = list(pool.map(lambda f: _check_one(f, tol, seed), files))
    worst = OK
    for f, (code, text, _) in zip(files, results):
        if len(files) > 1:
            print(f"== {f.name} (exit {code})")
        print(text)
        worst = max(worst, code)
    if out is not None:
        doc = {str(f): {"exit": c, **info} for f, (c, _, info) in zip(files, results)}
        Path(out).write_text(dumps(doc if len(files) > 1 else doc[str(files[0])]))
    return worst


# dilate

def _tol_dict(tol: TolerancePolicy) -> dict:
    return asdict(tol)


def _maps_doc(maps) -> list:
    return [[encode_matrix(b) for b in mp.blocks] for mp in maps]


def _dilation_result(inst, d: Dilation, seed: int, trials: int) -> dict:
    units = matrix_units(d.domain)
    doc = {
        "ranks": list(d.ranks),
        "J": [encode_matrix(b) for b in d.J.blocks],
        "pi": _maps_doc(d.pi),
        "D": _maps_doc([d.D(u) for u in units]),
        "report": d.report.as_dict(),
        "warnings": list(d.warnings),
    }
    if inst.kind == "measure":
        doc["subset_residual"] = max(subset_residuals(inst.payload, d).values())
    return doc


def _result(inst, seed, trials, body) -> dict:
    return {
        "format": "opdilate-result",
        "toolkit_version": __version__,
        "kind": inst.kind,
        "input_digest": inst.digest,
        "seed": int(seed),
        "trials": int(trials),
        "tolerance": _tol_dict(inst.tol),
        **body,
    }


def _passed(inst, body) -> bool:
    ok = body["report"]["passed"]
    if "subset_residual" in body:
        ok = ok and body["subset_residual"] <= inst.tol.residual_tol
    return ok


def _build(inst, seed, trials) -> dict:
    if inst.kind == "kernel":
        d = decompose(inst.payload, inst.tol)
        return {
            "ranks": list(d.module.ranks),
            "D": _maps_doc([d.D[x] for x in d.points]),
            "report": d.report.as_dict(),
            "warnings": [],
        }
    if inst.kind == "povm":
        d = naimark(inst.payload, inst.tol, trials, seed)
    elif inst.kind == "measure":
        d = ksgns_dilate(measure_to_cpmap(inst.payload, inst.tol), inst.tol, trials, seed)
    else:
        d = ksgns_dilate(inst.payload, inst.tol, trials, seed)
    return _dilation_result(inst, d, seed, trials)


def cmd_dilate(path, out, tol=None, seed=0, trials=20) -> int:
    try:
        inst = _load(path, tol)
        body = _build(inst, seed, trials)
    except (MalformedInput, KeyError) as exc:
        print(f"malformed input: {exc}", file=sys.stderr)
        return MALFORMED
    except _NEGATIVE as exc:
        print(f"not positive: {type(exc).__name__}: {exc}", file=sys.stderr)
        return FAIL
    except (ResidualExceeded, NoConvergence) as exc:
        print(f"residual exceeded: {exc}", file=sys.stderr)
        return RESIDUAL
    except (DilationError, ValueError) as exc:
        print(f"malformed input: {exc}", file=sys.stderr)
        return MALFORMED
    doc = _result(inst, seed, trials, body)
    Path(out).write_text(dumps(doc))
    _print_report(inst.kind, body)
    return OK if _passed(inst, body) else RESIDUAL


def _print_report(kind, body) -> None:
    rep = body["report"]
    print(f"{kind}: ranks {body['ranks']}")
    for name, ok in rep["clauses"].items():
        val = rep.get(name)
        extra = f" ({val:.3e})" if isinstance(val, float) else ""
        print(f"  {name:<16} {'pass' if ok else 'FAIL'}{extra}")
    if "subset_residual" in body:
        print(f"  {'subsets':<16} {body['subset_residual']:.3e}")
    for w in body.get("warnings", []):
        print(f"  warning: {w}")


# density

def cmd_density(path, out, weights=None) -> int:
    try:
        inst = _load(path, None)
        if inst.kind != "measure":
            raise MalformedInput(f"density needs a measure instance, got {inst.kind}")
        E = inst.payload
        user_dominating = False
        if weights is None:
            mu = dominating_measure(E)
        else:
            w = load_json(weights)
            validate(w, "weights")
            if "weights" in w:
                p = np.asarray(w["weights"], dtype=float)
                if p.shape != (E.m, E.m):
                    raise MalformedInput(f"weights must be {E.m}x{E.m}")
                mu = dominating_measure(E, p)
            else:
                vals = w["dominating"]
                if len(vals) != len(E.space):
                    raise MalformedInput(f"dominating measure needs {len(E.space)} values")
                mu = ComplexMeasure(E.space, dict(zip(E.space.atoms, vals)))
                user_dominating = True
        dens = density(E, mu)
    except NotDominating as exc:
        print(f"not dominating: {exc}", file=sys.stderr)
        return FAIL
    except (MalformedInput, DilationError, ValueError, KeyError) as exc:
        print(f"malformed input: {exc}", file=sys.stderr)
        return MALFORMED

    recon = 0.0
    for x in E.space.atoms:
        back = reconstruct_from_density(E, dens, mu, [x])
        target = E.atom_values[x]
        recon = max(recon, (back - target).frobenius() / max(1.0, target.frobenius()))
    doc = {
        "format": "opdilate-density",
        "toolkit_version": __version__,
        "input_digest": inst.digest,
        "atoms": list(E.space.atoms),
        "dominating": [mu.atom(x).real for x in E.space.atoms],
        "user_dominating": user_dominating,
        "densities": [encode_sesqui(dens[x]) for x in E.space.atoms],
        "report": {"reconstruction": recon},
    }
    Path(out).write_text(dumps(doc))
    print(f"density: {len(E.space)} atoms, multiply-back residual {recon:.3e}")
    return OK


# verify

def _decode_maps(raw, module: HilbertModule, shape_of, what) -> list[list[np.ndarray]]:
    out = []
    for t, blocks in enumerate(raw):
        if len(blocks) != len(module.ranks):
            raise MalformedInput(f"{what}[{t}]: expected {len(module.ranks)} blocks")
        out.append([decode_matrix(b, shape_of(k), f"{what}[{t}][{k}]") for k, b in enumerate(blocks)])
    return out


def _reload_dilation(inst, res) -> tuple[CPMapTable, Dilation]:
    E = _as_cpmap(inst)
    sig, m = inst.signature, inst.m
    module = HilbertModule(sig, tuple(res["ranks"]))
    if len(res["ranks"]) != sig.n_blocks:
        raise MalformedInput("ranks do not match the signature")
    J = ModuleMap(
        module,
        m,
        [decode_matrix(b, (r, m * n), f"J[{k}]") for k, (b, r, n) in enumerate(zip(res["J"], module.ranks, sig.block_dims))],
    )
    if len(res["pi"]) != E.domain.dim:
        raise MalformedInput(f"pi: expected {E.domain.dim} unit images")
    pis = _decode_maps(res["pi"], module, lambda k: (module.ranks[k], module.ranks[k]), "pi")
    pi = tuple(AdjointableMap(module, module, blocks) for blocks in pis)
    return E, Dilation(E.domain, module, pi, J)


def _compare(stored: dict, fresh: dict, say) -> bool:
    ok = True
    for key, val in fresh.items():
        if isinstance(val, float):
            old = stored.get(key)
            if not isinstance(old, (int, float)) or abs(old - val) > REPORT_TOL:
                say(f"  report mismatch on {key}: stored {old!r}, re-verified {val!r}")
                ok = False
    return ok


def cmd_verify(instance_path, result_path) -> int:
    say = print
    try:
        res = load_json(result_path)
        validate(res, "result")
        inst = _load(instance_path, None)
        if res["input_digest"] != inst.digest:
            print(f"digest mismatch: result was produced from {res['input_digest']}, instance is {inst.digest}", file=sys.stderr)
            return MALFORMED
        if res["kind"] != inst.kind:
            print(f"kind mismatch: {res['kind']} vs {inst.kind}", file=sys.stderr)
            return MALFORMED
        inst.tol = TolerancePolicy(**res["tolerance"])
        if inst.kind == "kernel":
            K = inst.payload
            module = HilbertModule(inst.signature, tuple(res["ranks"]))
            if len(res["D"]) != len(K.points) or len(res["ranks"]) != inst.signature.n_blocks:
                raise MalformedInput("D does not match the kernel points")
            shape = lambda k: (module.ranks[k], inst.m * inst.signature.block_dims[k])
            Ds = _decode_maps(res["D"], module, shape, "D")
            D = {x: ModuleMap(module, inst.m, blocks) for x, blocks in zip(K.points, Ds)}
            dec = KolmogorovDecomposition(module, K.points, D, module.ranks)
            fresh = verify_decomposition(K, dec, inst.tol).as_dict()
            extra = {}
        else:
            E, d = _reload_dilation(inst, res)
            report = verify_dilation(E, d, res["trials"], inst.tol, res["seed"])
            fresh = report.as_dict()
            extra = {}
            if inst.kind == "measure":
                extra["subset_residual"] = max(subset_residuals(inst.payload, d).values())
    except NoConvergence as exc:
        print(f"re-verification failed: {exc}", file=sys.stderr)
        return FAIL
    except _NEGATIVE as exc:
        print(f"instance is not positive: {exc}", file=sys.stderr)
        return FAIL
    except (MalformedInput, KeyError, TypeError, ValueError) as exc:
        print(f"malformed input: {exc}", file=sys.stderr)
        return MALFORMED

    failed = [name for name, ok in fresh["clauses"].items() if not ok]
    for name, ok in fresh["clauses"].items():
        say(f"  {name:<16} {'pass' if ok else 'FAIL'}")
    if "subset_residual" in extra:
        ok = extra["subset_residual"] <= inst.tol.residual_tol
        say(f"  {'subsets':<16} {'pass' if ok else 'FAIL'}")
        if not ok:
            failed.append("subsets")
    consistent = _compare(res["report"], fresh, say) and _compare(res, extra, say)
    if not consistent:
        failed.append("report")
    if failed:
        say(f"verify: FAILED clauses: {', '.join(failed)}")
        return FAIL
    say("verify: all clauses re-verified")
    return OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="opdilate", description="Positivity checks, Kolmogorov decompositions and minimal dilations.")
    ap.add_argument("--version", action="version", version=f"opdilate {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="test positivity / complete positivity of an instance (or a directory of them)")
    p.add_argument("path")
    p.add_argument("--tol", type=float, default=None, help="override psd and residual tolerances")
    p.add_argument("--seed", type=int, default=0, help="seed for sampled amplification checks")
    p.add_argument("--out", default=None, help="write a JSON report here")

    p = sub.add_parser("dilate", help="decompose a kernel or dilate a map, POVM or measure")
    p.add_argument("path")
    p.add_argument("--out", required=True)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--seed", type=int, default=0, help="seed for the randomized verification trials")
    p.add_argument("--trials", type=int, default=20)

    p = sub.add_parser("density", help="dominating measure and densities of a measure instance")
    p.add_argument("path")
    p.add_argument("--out", required=True)
    p.add_argument("--weights", default=None, help="JSON file with weights or a dominating measure")

    p = sub.add_parser("verify", help="re-verify a result file against its instance")
    p.add_argument("instance")
    p.add_argument("result")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "check":
        return cmd_check(args.path, args.tol, args.seed, args.out)
    if args.command == "dilate":
        return cmd_dilate(args.path, args.out, args.tol, args.seed, args.trials)
    if args.command == "density":
        return cmd_density(args.path, args.out, args.weights)
    return cmd_verify(args.instance, args.result)


if __name__ == "__main__":
    sys.exit(main())
