"""Parsing and printing of overlap monomials/polynomials, plus JSON report
serialization.

Grammar (ASCII only, whitespace ignored):

    monomial   := "1" | factor+
    factor     := "{" int "," int "}" ["^" int] | "{" int "}" ["^" int]
    polynomial := ["+"|"-"] term (("+"|"-") term)*
    term       := int | [int] monomial

``1`` denotes the empty monomial; exponents bind to the immediately
preceding factor and must be positive; vertex labels are positive integers.
Repeated factors accumulate their multiplicities.  Parse errors carry the
byte offset of the offending character.
"""

from __future__ import annotations

import json
from typing import Any

from .graphs import (
    EMPTY,
    GraphPolynomial,
    Multigraph,
    make_multigraph,
)
from . import lab as _lab
from . import operators as _ops

__all__ = [
    "ExpressionParseError",
    "JsonSchemaError",
    "parse_monomial",
    "parse_polynomial",
    "format_monomial",
    "format_polynomial",
    "to_json",
    "from_json",
    "as_jsonable",
]


class ExpressionParseError(ValueError):
    """Malformed expression text; ``offset`` points at the first bad byte."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class JsonSchemaError(ValueError):
    """A JSON report document violates the expected schema."""


def _check_ascii(s: str):
    for pos, ch in enumerate(s):
        if ord(ch) > 127:
            raise ExpressionParseError(f"non-ASCII character {ch!r}", pos)


def _skip_ws(s: str, i: int) -> int:
    while i < len(s) and s[i] in " \t\r\n":
        i += 1
    return i


def _scan_int(s: str, i: int) -> tuple[int, int]:
    start = i
    while i < len(s) and s[i].isdigit():
        i += 1
    if i == start:
        raise ExpressionParseError("expected an integer", start)
    return int(s[start:i]), i


def _scan_factor(s: str, i: int):
    """Parse one '{a,b}^k' or '{a}^k' starting at the '{' in position i.

    Returns ((vertices tuple, exponent), next position).
    """
    open_at = i
    i = _skip_ws(s, i + 1)
    a, i = _scan_int(s, i)
    i = _skip_ws(s, i)
    verts: tuple[int, ...]
    if i < len(s) and s[i] == ",":
        i = _skip_ws(s, i + 1)
        b, i = _scan_int(s, i)
        i = _skip_ws(s, i)
        verts = (a, b)
    else:
        verts = (a,)
    if i >= len(s) or s[i] != "}":
        raise ExpressionParseError("expected '}'", i)
    i += 1
    exp = 1
    j = _skip_ws(s, i)
    if j < len(s) and s[j] == "^":
        i = _skip_ws(s, j + 1)
        if i < len(s) and s[i] == "-":
            raise ExpressionParseError("negative exponent", i)
        exp, i = _scan_int(s, i)
        if exp == 0:
            raise ExpressionParseError("zero exponent", i - 1)
    if len(verts) == 2 and verts[0] == verts[1]:
        raise ExpressionParseError(f"loop edge {{{verts[0]},{verts[0]}}}", open_at)
    if min(verts) < 1:
        raise ExpressionParseError("vertex labels must be positive", open_at)
    return (verts, exp), i


def _scan_factors(s: str, i: int):
    edges, legs = [], []
    while i < len(s) and s[i] == "{":
        (verts, exp), i = _scan_factor(s, i)
        if len(verts) == 2:
            edges.append((verts[0], verts[1], exp))
        else:
            legs.append((verts[0], exp))
        i = _skip_ws(s, i)
    return edges, legs, i


def parse_monomial(s: str) -> Multigraph:
    """Parse a single monomial; ``"1"`` denotes the empty one."""
    _check_ascii(s)
    i = _skip_ws(s, 0)
    if i == len(s):
        raise ExpressionParseError("empty input", i)
    if s[i] == "1":
        j = _skip_ws(s, i + 1)
        if j != len(s):
            raise ExpressionParseError("unexpected text after '1'", j)
        return EMPTY
    if s[i] != "{":
        raise ExpressionParseError(f"expected '{{' or '1', found {s[i]!r}", i)
    edges, legs, i = _scan_factors(s, i)
    if i != len(s):
        raise ExpressionParseError(f"unexpected character {s[i]!r}", i)
    return make_multigraph(edges, legs)


def parse_polynomial(s: str) -> GraphPolynomial:
    """Parse a top-level signed sum of coefficient-monomial terms."""
    _check_ascii(s)
    i = _skip_ws(s, 0)
    if i == len(s):
        raise ExpressionParseError("empty input", i)
    terms: list[tuple[Multigraph, int]] = []
    first = True
    while i < len(s):
        sign = 1
        if s[i] == "+" or s[i] == "-":
            sign = -1 if s[i] == "-" else 1
            i = _skip_ws(s, i + 1)
        elif not first:
            raise ExpressionParseError(f"expected '+' or '-', found {s[i]!r}", i)
        first = False
        if i == len(s):
            raise ExpressionParseError("dangling sign", i)
        coeff = 1
        have_coeff = False
        if s[i].isdigit():
            coeff, i = _scan_int(s, i)
            have_coeff = True
            i = _skip_ws(s, i)
        if i < len(s) and s[i] == "{":
            edges, legs, i = _scan_factors(s, i)
            g = make_multigraph(edges, legs)
        elif have_coeff:
            # Bare integer term: coefficient times the empty monomial.  A
            # stray literal "1" after an explicit coefficient also means the
            # empty monomial ("2 1" == 2).
            if i < len(s) and s[i] == "1":
                j = _skip_ws(s, i + 1)
                if j < len(s) and s[j] not in "+-":
                    raise ExpressionParseError("unexpected text after '1'", j)
                i = j
            g = EMPTY
        else:
            raise ExpressionParseError(
                f"expected a term, found {s[i]!r}" if i < len(s) else "expected a term",
                i,
            )
        terms.append((g, sign * coeff))
        i = _skip_ws(s, i)
    return GraphPolynomial(terms)


def format_monomial(g: Multigraph) -> str:
    """Render edges then legs, with ``^k`` for multiplicities >= 2."""
    if not g.edges and not g.legs:
        return "1"
    parts = []
    for i, j, m in g.edges:
        parts.append(f"{{{i},{j}}}" + (f"^{m}" if m > 1 else ""))
    for v, n in g.legs:
        parts.append(f"{{{v}}}" + (f"^{n}" if n > 1 else ""))
    return "".join(parts)


def format_polynomial(p: GraphPolynomial) -> str:
    """Deterministic rendering: terms in canonical sort order, ``0`` if empty."""
    if not p:
        return "0"
    chunks = []
    for pos, (g, c) in enumerate(p.items()):
        mag = abs(c)
        body = format_monomial(g)
        if body == "1":
            text = str(mag)
        elif mag == 1:
            text = body
        else:
            text = f"{mag}{body}"
        if pos == 0:
            chunks.append(("-" if c < 0 else "") + text)
        else:
            chunks.append((" - " if c < 0 else " + ") + text)
    return "".join(chunks)


# --------------------------------------------------------------------------
# JSON report serialization.  Exact coefficients travel inside polynomial
# text (decimal strings); floats rely on repr round-tripping.

def as_jsonable(obj) -> dict[str, Any]:
    """Convert a report object to a JSON-ready dict with a ``type`` tag and
    a ``payload``/``timings`` split (timestamps stay out of the payload)."""
    if isinstance(obj, _ops.TheoremReport):
        return {
            "type": "theorem_report",
            "payload": {
                "graph": format_monomial(obj.graph),
                "n": obj.n,
                "lhs": format_polynomial(obj.lhs),
                "rhs": format_polynomial(obj.rhs),
                "equal": obj.equal,
                "raw_lhs_terms": obj.raw_lhs_terms,
                "raw_rhs_terms": obj.raw_rhs_terms,
                "canonical_lhs_terms": obj.canonical_lhs_terms,
                "canonical_rhs_terms": obj.canonical_rhs_terms,
            },
            "timings": {"wall_s": obj.wall_time_s},
        }
    if isinstance(obj, _lab.QuenchedEstimate):
        return {
            "type": "quenched_estimate",
            "payload": {
                "mean": obj.mean,
                "stderr": obj.stderr,
                "samples": obj.samples,
                "seed": obj.seed,
                "method": obj.method,
                "truncation": obj.truncation,
            },
            "timings": {},
        }
    if isinstance(obj, _lab.IdentityReport):
        return {
            "type": "identity_report",
            "payload": {
                "label": obj.label,
                "model": _model_dict(obj.model) if obj.model is not None else None,
                "graph": format_monomial(obj.graph) if obj.graph is not None else None,
                "n": obj.n,
                "method": obj.method,
                "samples": obj.samples,
                "seed": obj.seed,
                "lambda_grid": list(obj.lambda_grid),
                "rows": [
                    {
                        "label": r.label,
                        "lhs": r.lhs,
                        "lhs_stderr": r.lhs_stderr,
                        "rhs": r.rhs,
                        "rhs_stderr": r.rhs_stderr,
                        "diff": r.diff,
                        "diff_stderr": r.diff_stderr,
                        "tolerance": r.tolerance,
                        "passed": r.passed,
                    }
                    for r in obj.rows
                ],
                "passed": obj.passed,
            },
            "timings": {"wall_s": obj.wall_time_s},
        }
    raise TypeError(f"no JSON form for {type(obj).__name__}")


def _model_dict(model) -> dict[str, Any]:
    out = {"kind": model.kind, "beta": model.beta}
    if model.kind == "sk":
        out["n_spins"] = model.n_sites
    else:
        out["dims"] = list(model.dims)
    return out


def to_json(obj) -> str:
    return json.dumps(as_jsonable(obj), sort_keys=True, indent=2)


def _need(d: dict, key: str, kinds) -> Any:
    if key not in d:
        raise JsonSchemaError(f"missing field {key!r}")
    val = d[key]
    if kinds is not None and not isinstance(val, kinds):
        raise JsonSchemaError(f"field {key!r} has wrong type {type(val).__name__}")
    return val


def _model_from_dict(d: dict):
    kind = _need(d, "kind", str)
    beta = float(_need(d, "beta", (int, float)))
    if kind == "sk":
        return _lab.sk_model(_need(d, "n_spins", int), beta)
    if kind == "ea":
        return _lab.ea_model(tuple(_need(d, "dims", list)), beta)
    raise JsonSchemaError(f"unknown model kind {kind!r}")


def from_json(text: str):
    """Rebuild a report object from its JSON form; schema violations raise
    :class:`JsonSchemaError`."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise JsonSchemaError(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise JsonSchemaError("top level must be an object")
    tag = _need(doc, "type", str)
    payload = _need(doc, "payload", dict)
    timings = doc.get("timings", {})
    if tag == "theorem_report":
        return _ops.TheoremReport(
            graph=parse_monomial(_need(payload, "graph", str)),
            n=_need(payload, "n", int),
            lhs=parse_polynomial(_need(payload, "lhs", str)),
            rhs=parse_polynomial(_need(payload, "rhs", str)),
            equal=_need(payload, "equal", bool),
            raw_lhs_terms=_need(payload, "raw_lhs_terms", int),
            raw_rhs_terms=_need(payload, "raw_rhs_terms", int),
            canonical_lhs_terms=_need(payload, "canonical_lhs_terms", int),
            canonical_rhs_terms=_need(payload, "canonical_rhs_terms", int),
            wall_time_s=float(timings.get("wall_s", 0.0)),
        )
    if tag == "quenched_estimate":
        trunc = payload.get("truncation")
        return _lab.QuenchedEstimate(
            mean=float(_need(payload, "mean", (int, float))),
            stderr=float(_need(payload, "stderr", (int, float))),
            samples=_need(payload, "samples", int),
            seed=_need(payload, "seed", int),
            method=_need(payload, "method", str),
            truncation=None if trunc is None else float(trunc),
        )
    if tag == "identity_report":
        model = payload.get("model")
        graph = payload.get("graph")
        rows = tuple(
            _lab.IdentityRow(
                label=_need(r, "label", str),
                lhs=float(_need(r, "lhs", (int, float))),
                lhs_stderr=float(_need(r, "lhs_stderr", (int, float))),
                rhs=float(_need(r, "rhs", (int, float))),
                rhs_stderr=float(_need(r, "rhs_stderr", (int, float))),
                diff=float(_need(r, "diff", (int, float))),
                diff_stderr=float(_need(r, "diff_stderr", (int, float))),
                tolerance=float(_need(r, "tolerance", (int, float))),
                passed=_need(r, "passed", bool),
            )
            for r in _need(payload, "rows", list)
        )
        return _lab.IdentityReport(
            label=_need(payload, "label", str),
            model=_model_from_dict(model) if model is not None else None,
            graph=parse_monomial(graph) if graph is not None else None,
            n=payload.get("n"),
            method=_need(payload, "method", str),
            samples=_need(payload, "samples", int),
            seed=_need(payload, "seed", int),
            lambda_grid=tuple(
                float(x) for x in _need(payload, "lambda_grid", list)
            ),
            rows=rows,
            passed=_need(payload, "passed", bool),
            wall_time_s=float(timings.get("wall_s", 0.0)),
        )
    raise JsonSchemaError(f"unknown report type {tag!r}")
