"""Reading and writing spec files.

A spec file is a JSON object.  Submanifold specs::

    {"kind": "submanifold", "N": 1, "signs": [1, 1],
     "r": ["cos(u1)", "sin(u1)"], "n": ["sin(u1)", "-cos(u1)"]}

Frobenius specs::

    {"kind": "frobenius", "N": 2, "eta": [[1, 0], [0, 1]], "c": 1.0,
     "phi": "(u1^3 + u2^3)/6"}

``name`` is optional in both.  ``signs`` defaults to all +1 and ``N`` may be
omitted when it follows from the other fields.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path
from typing import Union

import numpy as np

from .errors import ComponentError, ExprError, SpecError
from .expr import VectorFunction, parse
from .frobenius import FrobeniusSpec
from .geometry import AmbientForm, SubmanifoldSpec

Spec = Union[SubmanifoldSpec, FrobeniusSpec]

_SUBMANIFOLD_KEYS = {"kind", "name", "N", "signs", "r", "n"}
_FROBENIUS_KEYS = {"kind", "name", "N", "eta", "c", "phi"}


def corpus_names() -> list[str]:
    root = resources.files("potnormals") / "corpus"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def corpus_path(name: str) -> Path:
    path = Path(str(resources.files("potnormals") / "corpus" / f"{name}.json"))
    if not path.is_file():
        raise FileNotFoundError(f"no corpus spec named {name!r}")
    return path


def load_corpus(name: str) -> Spec:
    return load_spec(corpus_path(name))


def load_spec(path) -> Spec:
    """Read and fully validate a spec file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise SpecError(f"cannot read {path}: {exc.strerror or exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return spec_from_dict(data, default_name=path.stem)


def _number(value, field):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SpecError(f"expected a number, got {value!r}", field)
    return float(value)


def _integer(value, field):
    if isinstance(value, bool) or not isinstance(value, int):
        raise SpecError(f"expected an integer, got {value!r}", field)
    return value


def _string_list(value, field):
    if not isinstance(value, list) or not all(isinstance(s, str) for s in value):
        raise SpecError("expected a list of expression strings", field)
    return value


def spec_from_dict(data, default_name: str = "") -> Spec:
    if not isinstance(data, dict):
        raise SpecError("spec must be a JSON object")
    kind = data.get("kind")
    if kind == "submanifold":
        return _submanifold(data, default_name)
    if kind == "frobenius":
        return _frobenius(data, default_name)
    raise SpecError(f"must be 'submanifold' or 'frobenius', got {kind!r}", "kind")


def _check_keys(data, allowed):
    extra = sorted(set(data) - allowed)
    if extra:
        raise SpecError(f"unknown key(s) {', '.join(extra)}")


def _submanifold(data, default_name):
    _check_keys(data, _SUBMANIFOLD_KEYS)
    for key in ("r", "n"):
        if key not in data:
            raise SpecError("missing", key)
    r = _string_list(data["r"], "r")
    n = _string_list(data["n"], "n")
    N = _integer(data["N"], "N") if "N" in data else len(r) // 2
    if N < 1:
        raise SpecError("must be >= 1", "N")
    signs = data.get("signs", [1] * (2 * N))
    if not isinstance(signs, list):
        raise SpecError("expected a list of +1/-1", "signs")
    for k, s in enumerate(signs):
        if isinstance(s, bool) or s not in (1, -1):
            raise SpecError(f"entry {k} is {s!r}, expected +1 or -1", "signs")
    for key, v in (("r", r), ("n", n)):
        if len(v) != 2 * N:
            raise SpecError(f"need {2 * N} components for N = {N}, got {len(v)}", key)
    try:
        rv = VectorFunction.from_sources(r, N, "r")
        nv = VectorFunction.from_sources(n, N, "n")
    except ComponentError as exc:
        raise SpecError(str(exc.cause), f"{exc.name}[{exc.index}]") from exc
    return SubmanifoldSpec(N, AmbientForm(tuple(signs)), rv, nv, data.get("name", default_name))


def _frobenius(data, default_name):
    _check_keys(data, _FROBENIUS_KEYS)
    for key in ("eta", "c", "phi"):
        if key not in data:
            raise SpecError("missing", key)
    eta = data["eta"]
    if not isinstance(eta, list) or not all(isinstance(row, list) for row in eta):
        raise SpecError("expected a square matrix (list of rows)", "eta")
    rows = [[_number(x, f"eta[{i}][{j}]") for j, x in enumerate(row)] for i, row in enumerate(eta)]
    N = _integer(data["N"], "N") if "N" in data else len(rows)
    if len(rows) != N or any(len(row) != N for row in rows):
        raise SpecError(f"must be {N} x {N}", "eta")
    c = _number(data["c"], "c")
    if c == 0:
        raise SpecError("the deformation parameter must satisfy c != 0", "c")
    phi = data["phi"]
    if not isinstance(phi, str):
        raise SpecError("expected an expression string", "phi")
    try:
        tree = parse(phi, N)
    except ExprError as exc:
        raise SpecError(str(exc), "phi") from exc
    return FrobeniusSpec(N, np.array(rows), c, tree, phi, data.get("name", default_name))


def spec_to_dict(spec: Spec) -> dict:
    """Canonical echo of a spec, as written into reports."""
    if isinstance(spec, SubmanifoldSpec):
        return {
            "kind": "submanifold",
            "name": spec.name,
            "N": spec.N,
            "signs": list(spec.ambient.signs),
            "r": list(spec.r.sources),
            "n": list(spec.n.sources),
        }
    return {
        "kind": "frobenius",
        "name": spec.name,
        "N": spec.N,
        "eta": spec.eta.tolist(),
        "c": spec.c_const,
        "phi": spec.phi_source,
    }
