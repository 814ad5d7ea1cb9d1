"""JSON formats for structures, maps, polynomials and eps-Carnot maps.

Rationals are strings ``"p/q"`` in lowest terms (``"p"`` when ``q = 1``);
indices in files are 1-based.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Sequence

from .carnot_structure import HFrame
from .coords import EpsCarnotMap, _hat_from_table
from .nilgroup import InvalidAlgebra, NilpotentGroup
from .weights import WeightError, WeightSequence
from .wpoly import WPoly, WPolyMap, WPolyVectorField, invert_map

DATA_DIR = Path(__file__).parent / "data"


class InputError(ValueError):
    """Malformed input file; ``path`` locates the offending key."""

    def __init__(self, message: str, path: str = "$"):
        super().__init__(f"{path}: {message}")
        self.path = path


def fmt_rat(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(Fraction(v))


def fmt_point(p: Sequence) -> str:
    return ",".join(fmt_rat(v) for v in p)


def parse_rat(s: Any, path: str = "$") -> Fraction:
    if isinstance(s, bool):
        raise InputError("expected a rational, got a boolean", path)
    if isinstance(s, int):
        return Fraction(s)
    if not isinstance(s, str):
        raise InputError(f"expected a rational string 'p/q', got {s!r}", path)
    try:
        return Fraction(s.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise InputError(f"cannot parse rational {s!r}", path) from exc


def parse_point(text: str, n: int | None = None, path: str = "point") -> tuple[Fraction, ...]:
    """``"1,0,1/2"`` -> rationals."""
    parts = [p for p in text.split(",") if p.strip() != ""]
    pt = tuple(parse_rat(p, path) for p in parts)
    if n is not None and len(pt) != n:
        raise InputError(f"expected {n} coordinates, got {len(pt)}", path)
    return pt


def to_jsonable(obj: Any) -> Any:
    if isinstance(obj, Fraction):
        return fmt_rat(obj)
    if isinstance(obj, float):
        return obj
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, WPoly):
        return poly_to_json(obj)
    return obj


def dumps(obj: Any) -> str:
    """Canonical JSON: sorted keys, fixed separators."""
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2, ensure_ascii=True)


# ---------------------------------------------------------------------------
# polynomials


def poly_to_json(p: WPoly) -> list[dict]:
    return [{"m": list(m), "c": fmt_rat(c)} for m, c in p.sorted_terms()]


def poly_from_json(data: Any, weights: Sequence[int], path: str = "$") -> WPoly:
    n = len(weights)
    if not isinstance(data, list):
        raise InputError("a polynomial is an array of {\"m\", \"c\"} terms", path)
    terms: dict = {}
    for idx, term in enumerate(data):
        tp = f"{path}[{idx}]"
        if not isinstance(term, dict) or set(term) != {"m", "c"}:
            raise InputError("each term needs exactly the keys \"m\" and \"c\"", tp)
        m = term["m"]
        if (not isinstance(m, list) or len(m) != n
                or not all(isinstance(e, int) and not isinstance(e, bool) and e >= 0 for e in m)):
            raise InputError(f"exponent vector must be {n} non-negative integers", f"{tp}.m")
        c = parse_rat(term["c"], f"{tp}.c")
        key = tuple(m)
        terms[key] = terms.get(key, Fraction(0)) + c
    return WPoly(tuple(weights), terms)


def field_to_json(f: WPolyVectorField) -> list:
    return [poly_to_json(c) for c in f.coeffs]


# ---------------------------------------------------------------------------
# structure files


@dataclass(frozen=True)
class Structure:
    name: str
    frame: HFrame
    constants: dict | None = None

    @property
    def group(self) -> NilpotentGroup | None:
        if self.constants is None:
            return None
        return NilpotentGroup.from_constants(self.frame.weights, self.constants)


def _load_json(path: Path) -> Any:
    try:
        return json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise InputError(f"no such file {path}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"invalid JSON in {path}: {exc}") from exc


def resolve(ref: str, base: Path | None = None) -> Path:
    """A file path, tried relative to ``base`` and then among the bundled data files."""
    cands = []
    p = Path(ref)
    if base is not None and not p.is_absolute():
        cands.append(base / p)
    cands.append(p)
    cands.append(DATA_DIR / p)
    if not p.suffix:
        cands.append(DATA_DIR / f"{ref}.json")
    for c in cands:
        if c.is_file():
            return c
    raise InputError(f"cannot find structure or map file {ref!r}")


def structure_from_json(data: Any) -> Structure:
    if not isinstance(data, dict):
        raise InputError("structure file must be a JSON object")
    allowed = {"name", "dim", "weights", "frame", "basepoint", "constants"}
    extra = set(data) - allowed
    if extra:
        raise InputError(f"unknown key(s) {sorted(extra)}")
    for key in ("name", "dim", "weights"):
        if key not in data:
            raise InputError(f"missing key {key!r}")
    if "frame" not in data and "constants" not in data:
        raise InputError("need a \"frame\" or \"constants\"")
    name = data["name"]
    if not isinstance(name, str):
        raise InputError("name must be a string", "$.name")
    n = data["dim"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise InputError("dim must be a positive integer", "$.dim")
    w = data["weights"]
    if not isinstance(w, list) or len(w) != n or not all(isinstance(v, int) and not isinstance(v, bool) for v in w):
        raise InputError(f"weights must be {n} integers", "$.weights")
    try:
        ws = WeightSequence(tuple(w))
    except WeightError as exc:
        raise InputError(str(exc), "$.weights") from exc

    constants = None
    if "constants" in data:
        raw = data["constants"]
        if not isinstance(raw, list):
            raise InputError("constants must be an array", "$.constants")
        constants = {}
        for idx, entry in enumerate(raw):
            ep = f"$.constants[{idx}]"
            if not isinstance(entry, dict) or set(entry) != {"i", "j", "k", "c"}:
                raise InputError("each constant needs exactly the keys i, j, k, c", ep)
            ijk = []
            for key in ("i", "j", "k"):
                v = entry[key]
                if not isinstance(v, int) or isinstance(v, bool) or not 1 <= v <= n:
                    raise InputError(f"index must be an integer in 1..{n}", f"{ep}.{key}")
                ijk.append(v - 1)
            constants[tuple(ijk)] = parse_rat(entry["c"], f"{ep}.c")
        try:
            group = NilpotentGroup.from_constants(ws, constants)
        except InvalidAlgebra as exc:
            raise InputError(f"invalid structure constants: {exc}", "$.constants") from exc

    if "frame" in data:
        fr = data["frame"]
        if not isinstance(fr, list) or len(fr) != n:
            raise InputError(f"frame must list {n} vector fields", "$.frame")
        fields = []
        for j, f in enumerate(fr):
            if not isinstance(f, list) or len(f) != n:
                raise InputError(f"a vector field is an array of {n} polynomials", f"$.frame[{j}]")
            fields.append(WPolyVectorField(tuple(poly_from_json(c, ws.w, f"$.frame[{j}][{l}]")
                                                 for l, c in enumerate(f))))
        fields_t = tuple(fields)
    else:
        fields_t = group.left_invariant_frame()
    bp = ()
    if "basepoint" in data:
        raw = data["basepoint"]
        if not isinstance(raw, list) or len(raw) != n:
            raise InputError(f"basepoint must have {n} rationals", "$.basepoint")
        bp = tuple(parse_rat(v, f"$.basepoint[{i}]") for i, v in enumerate(raw))
    return Structure(name, HFrame(ws, fields_t, bp), constants)


def parse_structure(path: str | Path) -> Structure:
    p = resolve(str(path))
    return structure_from_json(_load_json(p))


def structure_to_json(s: Structure) -> dict:
    fr = s.frame
    out: dict = {
        "name": s.name,
        "dim": fr.n,
        "weights": list(fr.weights.w),
        "frame": [field_to_json(f) for f in fr.fields],
    }
    if any(v != 0 for v in fr.basepoint):
        out["basepoint"] = [fmt_rat(v) for v in fr.basepoint]
    if s.constants:
        out["constants"] = [{"i": i + 1, "j": j + 1, "k": k + 1, "c": fmt_rat(c)}
                            for (i, j, k), c in sorted(s.constants.items()) if c != 0]
    return out


# ---------------------------------------------------------------------------
# map files


@dataclass(frozen=True)
class MapSpec:
    source: Structure
    target: Structure
    phi: WPolyMap
    basepoint: tuple[Fraction, ...]


def parse_map(path: str | Path) -> MapSpec:
    p = resolve(str(path))
    data = _load_json(p)
    if not isinstance(data, dict):
        raise InputError("map file must be a JSON object")
    for key in ("source", "target", "components"):
        if key not in data:
            raise InputError(f"missing key {key!r}")
    extra = set(data) - {"source", "target", "components", "basepoint"}
    if extra:
        raise InputError(f"unknown key(s) {sorted(extra)}")
    structs = []
    for key in ("source", "target"):
        ref = data[key]
        if not isinstance(ref, str):
            raise InputError("structure reference must be a file name", f"$.{key}")
        structs.append(structure_from_json(_load_json(resolve(ref, p.parent))))
    src, tgt = structs
    comps = data["components"]
    if not isinstance(comps, list) or len(comps) != tgt.frame.n:
        raise InputError(f"need {tgt.frame.n} component polynomials", "$.components")
    ws = src.frame.weights.w
    phi = WPolyMap(tuple(poly_from_json(c, ws, f"$.components[{i}]") for i, c in enumerate(comps)),
                   tgt.frame.weights.w)
    bp = tuple(Fraction(0) for _ in ws)
    if "basepoint" in data:
        raw = data["basepoint"]
        if not isinstance(raw, list) or len(raw) != len(ws):
            raise InputError(f"basepoint must have {len(ws)} rationals", "$.basepoint")
        bp = tuple(parse_rat(v, f"$.basepoint[{i}]") for i, v in enumerate(raw))
    return MapSpec(src, tgt, phi, bp)


# ---------------------------------------------------------------------------
# eps-Carnot maps


def eps_to_json(e: EpsCarnotMap) -> dict:
    return {
        "basepoint": [fmt_rat(v) for v in e.basepoint],
        "weights": list(e.weights),
        "A": [[fmt_rat(v) for v in row] for row in e.A],
        "d": [{"k": k + 1, "m": list(beta), "c": fmt_rat(c)} for (k, beta), c in sorted(e.d.items())],
        "hat": [poly_to_json(c) for c in e.hat.components],
        "hat_inverse": [poly_to_json(c) for c in e.hat_inverse.components],
    }


def eps_from_json(data: Any) -> EpsCarnotMap:
    if not isinstance(data, dict):
        raise InputError("eps map must be a JSON object")
    for key in ("basepoint", "weights", "A", "d"):
        if key not in data:
            raise InputError(f"missing key {key!r}")
    try:
        ws = WeightSequence(tuple(data["weights"])).w
    except (WeightError, TypeError) as exc:
        raise InputError(str(exc), "$.weights") from exc
    n = len(ws)
    bp = tuple(parse_rat(v, f"$.basepoint[{i}]") for i, v in enumerate(data["basepoint"]))
    A = tuple(tuple(parse_rat(v, f"$.A[{i}][{j}]") for j, v in enumerate(row)) for i, row in enumerate(data["A"]))
    if len(bp) != n or len(A) != n or any(len(r) != n for r in A):
        raise InputError("shape mismatch between weights, basepoint and A")
    d = {}
    for idx, entry in enumerate(data["d"]):
        d[(int(entry["k"]) - 1, tuple(int(e) for e in entry["m"]))] = parse_rat(entry["c"], f"$.d[{idx}].c")
    hat = _hat_from_table(d, ws)
    return EpsCarnotMap(bp, A, hat, invert_map(hat), d)
