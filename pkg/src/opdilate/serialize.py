"""JSON encoding of instances and results.

Complex numbers are ``[re, im]`` pairs and matrices are row-major nested lists.
Floats go through ``json``'s shortest round-trip repr, so encode followed by
decode reproduces every array bit for bit.
"""
from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from importlib import resources
from typing import Any

import jsonschema
import numpy as np

from .algebra import CStarSignature
from .errors import DilationError
from .kolmogorov import Kernel
from .ksgns import CPMapTable
from .measures import FiniteMeasurableSpace, SesquiMeasure
from .modules import SesquiMap
from .numkernel import DEFAULT_TOL, TolerancePolicy


class MalformedInput(DilationError):
    pass


_SCHEMAS: dict[str, dict] = {}


def load_schema(name: str) -> dict:
    if name not in _SCHEMAS:
        text = resources.files("opdilate").joinpath("schema", f"{name}.schema.json").read_text()
        _SCHEMAS[name] = json.loads(text)
    return _SCHEMAS[name]


def _validator(name: str):
    schema = load_schema(name)
    registry = None
    if name != "instance":
        from referencing import Registry, Resource

        inst = load_schema("instance")
        registry = Registry().with_resource(inst["$id"], Resource.from_contents(inst))
    cls = jsonschema.validators.validator_for(schema)
    return cls(schema, registry=registry) if registry is not None else cls(schema)


def validate(obj: Any, name: str) -> None:
    err = jsonschema.exceptions.best_match(_validator(name).iter_errors(obj))
    if err is not None:
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise MalformedInput(f"{name} schema violation at {where}: {err.message}")


def encode_matrix(a) -> list:
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2:
        raise ValueError(f"expected a matrix, got shape {a.shape}")
    return [[[float(z.real), float(z.imag)] for z in row] for row in a]


def decode_matrix(obj, shape: tuple[int, int] | None = None, what: str = "matrix") -> np.ndarray:
    if not isinstance(obj, list) or any(not isinstance(row, list) for row in obj):
        raise MalformedInput(f"{what}: expected a list of rows")
    widths = {len(row) for row in obj}
    if len(widths) > 1:
        raise MalformedInput(f"{what}: ragged rows")
    cols = widths.pop() if widths else 0
    arr = np.zeros((len(obj), cols), dtype=np.complex128)
    for i, row in enumerate(obj):
        for j, z in enumerate(row):
            if not (isinstance(z, list) and len(z) == 2):
                raise MalformedInput(f"{what}[{i}][{j}]: expected an [re, im] pair")
            arr[i, j] = complex(float(z[0]), float(z[1]))
    if not np.all(np.isfinite(arr)):
        raise MalformedInput(f"{what}: non-finite entry")
    if shape is not None and arr.shape != shape:
        if arr.size == 0 and 0 in shape:
            return np.zeros(shape, dtype=np.complex128)
        raise MalformedInput(f"{what}: shape {arr.shape}, expected {shape}")
    return arr


def encode_sesqui(s: SesquiMap) -> list:
    return [encode_matrix(f) for f in s.flats]


def decode_sesqui(obj, sig: CStarSignature, m: int, what: str = "value") -> SesquiMap:
    if not isinstance(obj, list) or len(obj) != sig.n_blocks:
        raise MalformedInput(f"{what}: expected {sig.n_blocks} block matrices")
    flats = [decode_matrix(f, (m * n, m * n), f"{what}[{k}]") for k, (f, n) in enumerate(zip(obj, sig.block_dims))]
    return SesquiMap.from_flats(sig, m, flats)


def canonical_bytes(obj: Any) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False).encode()


def digest(obj: Any) -> str:
    return "sha256:" + hashlib.sha256(canonical_bytes(obj)).hexdigest()


_PAIR = re.compile(r"\[\s*([^\[\]\s,]+),\s*([^\[\]\s,]+)\s*\]")


def dumps(obj: Any) -> str:
    """Deterministic pretty JSON (sorted keys, repr floats, one line per complex pair)."""
    text = json.dumps(obj, sort_keys=True, indent=1, ensure_ascii=False, allow_nan=False)
    return _PAIR.sub(r"[\1, \2]", text) + "\n"


@dataclass
class Instance:
    kind: str
    raw: dict
    digest: str
    signature: CStarSignature
    m: int
    tol: TolerancePolicy
    payload: Any  # Kernel, CPMapTable, list[SesquiMap] or SesquiMeasure


def tolerance_from(raw: dict, override: float | None = None) -> TolerancePolicy:
    tol = DEFAULT_TOL.replace(**raw.get("tolerance", {}))
    if override is not None:
        tol = tol.replace(psd_tol=override, residual_tol=override)
    return tol


def parse_instance(raw: Any, tol_override: float | None = None) -> Instance:
    """Validate and decode an instance document.

    Raises ``MalformedInput`` on schema or shape errors. A cpmap whose table is
    not Hermitian raises ``NotHermitian`` from the table constructor.
    """
    validate(raw, "instance")
    try:
        tol = tolerance_from(raw, tol_override)
    except ValueError as exc:
        raise MalformedInput(f"tolerance: {exc}") from None
    sig = CStarSignature(tuple(raw["signature"]))
    m = int(raw["m"])
    kind = raw["kind"]
    if kind == "kernel":
        points = list(raw["points"])
        if len(set(points)) != len(points):
            raise MalformedInput("points must be distinct")
        table = raw["table"]
        if len(table) != len(points) or any(len(row) != len(points) for row in table):
            raise MalformedInput(f"table must be {len(points)}x{len(points)}")
        vals = {}
        for a, x in enumerate(points):
            for b, y in enumerate(points):
                vals[(x, y)] = decode_sesqui(table[a][b], sig, m, f"table[{a}][{b}]")
        payload = Kernel(sig, m, points, vals)
    elif kind == "cpmap":
        domain = CStarSignature(tuple(raw["domain"]))
        if len(raw["values"]) != domain.dim:
            raise MalformedInput(f"values: expected {domain.dim} entries (one per matrix unit)")
        vals = [decode_sesqui(v, sig, m, f"values[{i}]") for i, v in enumerate(raw["values"])]
        payload = CPMapTable(domain, sig, m, vals, tol)
    elif kind == "povm":
        payload = [decode_sesqui(v, sig, m, f"effects[{i}]") for i, v in enumerate(raw["effects"])]
    else:
        atoms = list(raw["atoms"])
        if len(set(atoms)) != len(atoms):
            raise MalformedInput("atoms must be distinct")
        if len(raw["values"]) != len(atoms):
            raise MalformedInput(f"values: expected {len(atoms)} entries (one per atom)")
        space = FiniteMeasurableSpace(tuple(atoms))
        vals = {x: decode_sesqui(v, sig, m, f"values[{i}]") for i, (x, v) in enumerate(zip(atoms, raw["values"]))}
        payload = SesquiMeasure(space, sig, m, vals)
    return Instance(kind, raw, digest(raw), sig, m, tol, payload)


def load_json(path) -> Any:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedInput(f"{path}: {exc}") from None


def instance_document(kind: str, signature: CStarSignature, m: int, **payload) -> dict:
    """Build an instance document from library objects.

    ``payload`` keys: ``domain`` and ``values`` (SesquiMaps) for cpmap,
    ``effects`` for povm, ``atoms`` and ``values`` for measure, ``points``
    and ``table`` (nested lists of SesquiMaps) for kernel.
    """
    doc: dict = {"kind": kind, "signature": list(signature.block_dims), "m": int(m)}
    for key, val in payload.items():
        if key == "domain":
            doc[key] = list(val.block_dims)
        elif key in ("values", "effects"):
            doc[key] = [encode_sesqui(s) for s in val]
        elif key == "table":
            doc[key] = [[encode_sesqui(s) for s in row] for row in val]
        elif key == "tolerance":
            doc[key] = dict(val)
        else:
            doc[key] = list(val)
    validate(doc, "instance")
    return doc


def cpmap_document(E: CPMapTable) -> dict:
    return instance_document("cpmap", E.signature, E.m, domain=E.domain, values=E.values)


def kernel_document(K: Kernel) -> dict:
    table = [[K(x, y) for y in K.points] for x in K.points]
    return instance_document("kernel", K.signature, K.m, points=K.points, table=table)


def measure_document(E: SesquiMeasure) -> dict:
    return instance_document(
        "measure", E.signature, E.m, atoms=E.space.atoms, values=[E.atom_values[x] for x in E.space.atoms]
    )


def povm_document(effects) -> dict:
    s = effects[0]
    return instance_document("povm", s.signature, s.m, effects=effects)
