"""Text serialization of OperatorSpec.

The file is JSON laid out one coefficient term per line, so a parse error
points at a meaningful line.  Floats are written with ``repr`` (shortest
round-trip form) and fixed-point values as hex fractions, which makes
serialize -> parse -> serialize byte-identical.
"""
from __future__ import annotations

import json
import re
from pathlib import Path

from .dynamics import Frequency, TorusPoint, fixed_to_hex, hex_to_fixed
from .errors import SpecFormatError
from .operator import HoppingFamily, OperatorSpec, TrigPoly

FORMAT_TAG = "skewloc-spec/1"


def _num(x: float) -> str:
    return json.dumps(float(x))


def _poly_lines(p: TrigPoly, indent: str) -> list[str]:
    rows = []
    for l in sorted(p.terms):
        c = complex(p.terms[l])
        rows.append(f"{indent}  [{json.dumps(list(l))}, {_num(c.real)}, {_num(c.imag)}]")
    body = ",\n".join(rows)
    head = f'{{"real": {json.dumps(bool(p.real))}, "terms": ['
    return [head + ("\n" + body + "\n" + indent + "]}" if rows else "]}")]


def dumps_spec(spec: OperatorSpec) -> str:
    x0 = spec.x0
    if x0.is_fixed:
        x0_line = json.dumps({"bits": x0.bits, "coords": x0.hex()})
    else:
        x0_line = json.dumps({"bits": None, "coords": [float(c) for c in x0.coords]})
    out = [
        "{",
        f'"format": {json.dumps(FORMAT_TAG)},',
        f'"d": {spec.d},',
        f'"seed": {json.dumps(spec.seed)},',
        f'"omega": {json.dumps({"hex": spec.omega.hex(), "dc_constant": spec.omega.dc_constant})},',
        f'"x0": {x0_line},',
        f'"gamma": {_num(spec.hopping.gamma)},',
        f'"C1": {_num(spec.hopping.C1)},',
        f'"K_max": {spec.hopping.K_max},',
        f'"v": {_poly_lines(spec.v, "")[0]},',
        '"phis": {',
    ]
    keys = sorted(spec.hopping.phis)
    for i, k in enumerate(keys):
        sep = "," if i < len(keys) - 1 else ""
        out.append(f'"{k}": {_poly_lines(spec.hopping.phis[k], "")[0]}{sep}')
    out += ["}", "}", ""]
    return "\n".join(out)


def _line_of(text: str, key: str) -> int | None:
    m = re.search(r'"' + re.escape(key) + r'"\s*:', text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _need(obj: dict, key: str, text: str, kind=None):
    if key not in obj:
        raise SpecFormatError("missing field", field=key, line=None)
    val = obj[key]
    if kind is not None and not isinstance(val, kind) or isinstance(val, bool) and kind is not bool:
        raise SpecFormatError(f"wrong type {type(val).__name__}", field=key, line=_line_of(text, key))
    return val


def _parse_poly(raw, name: str, d: int, text: str) -> TrigPoly:
    line = _line_of(text, name)
    if not isinstance(raw, dict) or "terms" not in raw:
        raise SpecFormatError("expected an object with 'terms'", field=name, line=line)
    terms = {}
    for t in raw["terms"]:
        ok = (isinstance(t, list) and len(t) == 3 and isinstance(t[0], list) and len(t[0]) == d
              and all(isinstance(v, int) for v in t[0])
              and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in t[1:]))
        if not ok:
            raise SpecFormatError(f"bad term {t!r}; expected [[l_1..l_{d}], re, im]", field=name, line=line)
        terms[tuple(t[0])] = terms.get(tuple(t[0]), 0) + complex(t[1], t[2])
    return TrigPoly(d, terms, real=bool(raw.get("real", False)))


def loads_spec(text: str) -> OperatorSpec:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecFormatError(exc.msg, line=exc.lineno) from None
    if not isinstance(obj, dict):
        raise SpecFormatError("top level must be an object", line=1)
    if obj.get("format") != FORMAT_TAG:
        raise SpecFormatError(f"expected format {FORMAT_TAG!r}", field="format", line=_line_of(text, "format"))
    d = _need(obj, "d", text, int)
    try:
        om = _need(obj, "omega", text, dict)
        omega = Frequency.from_hex(om["hex"], dc_constant=float(om.get("dc_constant", 0.1)))
    except (KeyError, ValueError, TypeError) as exc:
        raise SpecFormatError(str(exc), field="omega", line=_line_of(text, "omega")) from None
    try:
        xr = _need(obj, "x0", text, dict)
        if xr.get("bits") is None:
            x0 = TorusPoint.from_floats([float(c) for c in xr["coords"]])
        else:
            vals = [hex_to_fixed(c) for c in xr["coords"]]
            if any(b != xr["bits"] for _, b in vals):
                raise ValueError("coordinate width does not match 'bits'")
            x0 = TorusPoint.from_fixed([v for v, _ in vals], xr["bits"])
    except (KeyError, ValueError, TypeError) as exc:
        raise SpecFormatError(str(exc), field="x0", line=_line_of(text, "x0")) from None
    if x0.d != d:
        raise SpecFormatError(f"x0 has {x0.d} coordinates, d={d}", field="x0", line=_line_of(text, "x0"))
    gamma = float(_need(obj, "gamma", text, (int, float)))
    C1 = float(_need(obj, "C1", text, (int, float)))
    K_max = _need(obj, "K_max", text, int)
    v = _parse_poly(_need(obj, "v", text), "v", d, text)
    phis = {}
    for key, raw in _need(obj, "phis", text, dict).items():
        if not key.isdigit() or int(key) < 1:
            raise SpecFormatError("hopping index must be a positive integer", field=f"phis.{key}",
                                  line=_line_of(text, key))
        phis[int(key)] = _parse_poly(raw, key, d, text)
    seed = obj.get("seed")
    if seed is not None and not isinstance(seed, int):
        raise SpecFormatError("seed must be an integer or null", field="seed", line=_line_of(text, "seed"))
    return OperatorSpec(d, omega, v, HoppingFamily(gamma, C1, K_max, phis), x0, seed)


def save_spec(spec: OperatorSpec, path) -> Path:
    path = Path(path)
    path.write_text(dumps_spec(spec), encoding="utf-8")
    return path


def load_spec(path) -> OperatorSpec:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise SpecFormatError(f"cannot read {path}: {exc.strerror}") from None
    return loads_spec(text)


def validate_spec_file(path) -> list[str]:
    """Load a spec file and re-check every admissibility invariant; [] means admissible."""
    return load_spec(path).violations()
