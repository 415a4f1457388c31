"""Grid-driven analyses and their reports.

A report is a plain JSON-compatible dict.  Everything under the ``data`` key
is a deterministic function of the inputs; tool metadata sits beside it in
the envelope.  Points are visited in row-major order with endpoints
included.
"""

from __future__ import annotations

import itertools
import json
from collections.abc import Iterable, Sequence
from dataclasses import asdict, dataclass

import numpy as np

from . import __version__
from .errors import IntegrationError, OrthogonalityError, PotnormalsError, SpecError
from .frobenius import (
    FrobeniusSpec,
    flat_curvature_residual,
    realize,
    realize_verify,
    structure_tensor,
    third_derivatives,
    verify_frame_theory,
    wdvv_tensor,
)
from .geometry import SubmanifoldSpec, ToleranceConfig, analyze_point, dualize
from .specfile import spec_to_dict

PASS, FAIL = "PASS", "FAIL"


@dataclass(frozen=True)
class GridAxis:
    min: float
    max: float
    count: int

    def __post_init__(self):
        if not self.min <= self.max:
            raise SpecError(f"min {self.min} > max {self.max}", "grid")
        if self.count < 1:
            raise SpecError("count must be >= 1", "grid")

    def values(self) -> list[float]:
        if self.count == 1:
            return [self.min]
        return np.linspace(self.min, self.max, self.count).tolist()


@dataclass(frozen=True)
class GridSpec:
    axes: tuple

    def points(self) -> list[list[float]]:
        return [list(p) for p in itertools.product(*(ax.values() for ax in self.axes))]

    def as_list(self):
        return [[ax.min, ax.max, ax.count] for ax in self.axes]


def parse_grid(text: str, dim: int) -> GridSpec:
    """``min:max:count`` per parameter, comma separated; a single entry is broadcast."""
    axes = []
    for part in text.split(","):
        pieces = part.strip().split(":")
        if len(pieces) != 3:
            raise SpecError(f"expected min:max:count, got {part!r}", "grid")
        try:
            lo, hi, count = float(pieces[0]), float(pieces[1]), int(pieces[2])
        except ValueError:
            raise SpecError(f"cannot read {part!r}", "grid") from None
        axes.append(GridAxis(lo, hi, count))
    if len(axes) == 1:
        axes = axes * dim
    if len(axes) != dim:
        raise SpecError(f"{len(axes)} axes given for {dim} parameters", "grid")
    return GridSpec(tuple(axes))


def parse_point(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",")]
    except ValueError:
        raise SpecError(f"cannot read point {text!r}") from None


# -- helpers ----------------------------------------------------------------


def _check(value, limit, ok=None):
    value = float(value)
    if ok is None:
        ok = value <= limit
    return {"value": value, "limit": limit, "verdict": PASS if ok else FAIL}


def _error_entry(exc: Exception) -> dict:
    entry = {"type": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, OrthogonalityError):
        entry["orthogonality_defect"] = exc.defect
    return entry


def _aggregate(points: Sequence[dict]) -> dict:
    agg: dict = {}
    for p in points:
        for k, v in p.get("metrics", {}).items():
            agg[k] = max(agg.get(k, v), v)
    return dict(sorted(agg.items()))


def _finish(data: dict) -> dict:
    data["verdict"] = PASS if all(c["verdict"] == PASS for c in data["checks"].values()) else FAIL
    return data


def _tolerances(tol: ToleranceConfig) -> dict:
    return asdict(tol)


# -- analyze ----------------------------------------------------------------


def _submanifold_point(spec, u, tol, tensors):
    try:
        pa = analyze_point(spec, u, tol)
    except PotnormalsError as exc:
        return {"u": list(u), "error": _error_entry(exc)}
    entry = {"u": list(u), "metrics": pa.scalars()}
    if tensors:
        entry["tensors"] = pa.tensors()
    return entry


def _submanifold_checks(points, agg, tol):
    errors = [p for p in points if "error" in p]
    ortho_fail = any(p["error"]["type"] == "OrthogonalityError" for p in errors)
    checks = {
        "point_errors": _check(len(errors), 0),
        "orthogonality": _check(agg.get("orthogonality_defect", 0.0), 1e-9, not ortho_fail),
        "symmetry": _check(agg.get("symmetry_defect", 0.0), tol.swap_tol),
        "reconstruction": _check(agg.get("reconstruction", 0.0), tol.swap_tol),
        "frame_condition": _check(agg.get("frame_condition", 0.0), tol.frame_condition_max),
        "levi_civita": _check(
            max(agg.get("levi_civita_defect_a", 0.0), agg.get("levi_civita_defect_d", 0.0)),
            tol.connection_tol,
        ),
        "zero_curvature": _check(
            max(agg.get(k, 0.0) for k in ("gauss_residual", "codazzi_residual", "ricci_residual")),
            tol.residual_tol,
        ),
    }
    if tol.fd_check:
        checks["fd_decomposition"] = _check(agg.get("fd_defect", 0.0), tol.fd_tol)
    return checks


def _frobenius_point(spec: FrobeniusSpec, u, curvature: bool):
    try:
        third = third_derivatives(spec, u)
        metrics = {"wdvv_residual": float(np.max(np.abs(wdvv_tensor(third, spec.eta_inv))))}
        if curvature:
            b = structure_tensor(third, spec.eta_inv)
            lowered = np.einsum("ks,sij->kij", spec.eta, b)
            scale = 1.0 + float(np.max(np.abs(third)))
            metrics["structure_symmetry"] = float(
                max(np.max(np.abs(lowered - lowered.transpose(p))) for p in ((1, 0, 2), (2, 1, 0)))
            ) / scale
            gauss, codazzi, ricci = flat_curvature_residual(spec, u)
            metrics.update(gauss_residual=gauss, codazzi_residual=codazzi, ricci_residual=ricci)
    except PotnormalsError as exc:
        return {"u": list(u), "error": _error_entry(exc)}
    return {"u": list(u), "metrics": metrics}


def _frobenius_checks(points, agg, tol, curvature):
    errors = [p for p in points if "error" in p]
    checks = {
        "point_errors": _check(len(errors), 0),
        "wdvv": _check(agg.get("wdvv_residual", 0.0), tol.residual_tol),
    }
    if curvature:
        checks["structure_symmetry"] = _check(agg.get("structure_symmetry", 0.0), 1e-12)
        checks["zero_curvature"] = _check(
            max(agg.get(k, 0.0) for k in ("gauss_residual", "codazzi_residual", "ricci_residual")),
            tol.residual_tol,
        )
    return checks


def run_analyze(spec, grid: GridSpec, tol: ToleranceConfig | None = None, tensors: bool = False) -> dict:
    """Analyze a submanifold or Frobenius spec at every grid point."""
    tol = tol or ToleranceConfig()
    if isinstance(spec, SubmanifoldSpec):
        points = [_submanifold_point(spec, u, tol, tensors) for u in grid.points()]
        agg = _aggregate(points)
        checks = _submanifold_checks(points, agg, tol)
    else:
        points = [_frobenius_point(spec, u, True) for u in grid.points()]
        agg = _aggregate(points)
        checks = _frobenius_checks(points, agg, tol, True)
    return _finish({
        "command": "analyze",
        "spec": spec_to_dict(spec),
        "grid": grid.as_list(),
        "tolerances": _tolerances(tol),
        "points": points,
        "aggregate": agg,
        "checks": checks,
    })


def run_wdvv(spec, grid: GridSpec, tol: ToleranceConfig | None = None) -> dict:
    if not isinstance(spec, FrobeniusSpec):
        raise SpecError("the wdvv command needs a frobenius spec", "kind")
    tol = tol or ToleranceConfig()
    points = [_frobenius_point(spec, u, False) for u in grid.points()]
    agg = _aggregate(points)
    return _finish({
        "command": "wdvv",
        "spec": spec_to_dict(spec),
        "grid": grid.as_list(),
        "tolerances": _tolerances(tol),
        "points": points,
        "aggregate": agg,
        "checks": _frobenius_checks(points, agg, tol, False),
    })


# -- dualize ----------------------------------------------------------------

# (field of the spec's analysis, field of the dual's analysis) per swap row
SWAP_TABLE = (
    ("g", "h"),
    ("h", "g"),
    ("a", "d"),
    ("d", "a"),
    ("b", "c"),
    ("c", "b"),
    ("gauss_residual", "ricci_residual"),
    ("ricci_residual", "gauss_residual"),
    ("codazzi_residual", "codazzi_residual"),
)


def _swap_point(spec, dual, u, tol):
    try:
        pa = analyze_point(spec, u, tol)
        pd = analyze_point(dual, u, tol)
    except PotnormalsError as exc:
        return {"u": list(u), "error": _error_entry(exc)}
    metrics = {}
    for mine, theirs in SWAP_TABLE:
        diff = np.max(np.abs(np.asarray(getattr(pa, mine)) - np.asarray(getattr(pd, theirs))))
        metrics[f"{mine}_vs_dual_{theirs}"] = float(diff)
    return {"u": list(u), "metrics": metrics}


def run_dualize(spec, grid: GridSpec, tol: ToleranceConfig | None = None) -> dict:
    """Analyze a spec and its dual side by side and tabulate the swap."""
    if not isinstance(spec, SubmanifoldSpec):
        raise SpecError("the dualize command needs a submanifold spec", "kind")
    tol = tol or ToleranceConfig()
    dual = dualize(spec)
    points = [_swap_point(spec, dual, u, tol) for u in grid.points()]
    agg = _aggregate(points)
    tensor_keys = [f"{m}_vs_dual_{t}" for m, t in SWAP_TABLE[:6]]
    errors = [p for p in points if "error" in p]
    checks = {
        "point_errors": _check(len(errors), 0),
        "involution": _check(0.0 if dualize(dual) == spec else 1.0, 0.0),
        "tensor_swap": _check(max((agg.get(k, 0.0) for k in tensor_keys), default=0.0), tol.swap_tol),
        "gauss_ricci_swap": _check(
            max(agg.get("gauss_residual_vs_dual_ricci_residual", 0.0),
                agg.get("ricci_residual_vs_dual_gauss_residual", 0.0)),
            tol.swap_tol,
        ),
        "codazzi_self_dual": _check(agg.get("codazzi_residual_vs_dual_codazzi_residual", 0.0), tol.swap_tol),
    }
    return _finish({
        "command": "dualize",
        "spec": spec_to_dict(spec),
        "dual": spec_to_dict(dual),
        "grid": grid.as_list(),
        "tolerances": _tolerances(tol),
        "swap_table": [list(row) for row in SWAP_TABLE],
        "points": points,
        "aggregate": agg,
        "checks": checks,
    })


# -- realize ----------------------------------------------------------------


def run_realize(spec, start, end, via: Iterable = (), tol: ToleranceConfig | None = None) -> dict:
    if not isinstance(spec, FrobeniusSpec):
        raise SpecError("the realize command needs a frobenius spec", "kind")
    tol = tol or ToleranceConfig()
    via = [list(map(float, p)) for p in via]
    path = via + [list(map(float, end))]
    data = {
        "command": "realize",
        "spec": spec_to_dict(spec),
        "from": list(map(float, start)),
        "via": via,
        "to": list(map(float, end)),
        "tolerances": _tolerances(tol),
    }
    try:
        state = realize(spec, start, path, tol.integration_step, wdvv_gate=tol.residual_tol)
    except IntegrationError as exc:
        data["error"] = {"type": type(exc).__name__, "message": str(exc), "u": exc.u}
        data["checks"] = {"integration": _check(1.0, 0.0)}
        return _finish(data)
    defects = realize_verify(spec, state)
    theory = verify_frame_theory(spec, state)
    data.update(state=state.as_dict(), signs=list(state.signs), defects=defects, theory=theory)
    data["checks"] = {
        "integration": _check(0.0, 0.0),
        "gram": _check(max(defects.values()), tol.residual_tol),
        "flat_connection": _check(max(theory["a_max"], theory["d_max"]), tol.residual_tol),
        "structure": _check(max(theory["b_defect"], theory["c_defect"]), tol.residual_tol),
    }
    return _finish(data)


# -- output -----------------------------------------------------------------


def envelope(data: dict) -> dict:
    return {"tool": {"name": "potnormals", "version": __version__}, "data": data}


def to_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def _fmt(x):
    if isinstance(x, float):
        return f"{x:.3e}"
    return str(x)


# per-command columns for the per-point table
_COLUMNS = {
    "analyze": ("gauss_residual", "codazzi_residual", "ricci_residual",
                "levi_civita_defect_a", "levi_civita_defect_d", "wdvv_residual"),
    "wdvv": ("wdvv_residual",),
    "dualize": ("g_vs_dual_h", "a_vs_dual_d", "b_vs_dual_c", "codazzi_residual_vs_dual_codazzi_residual"),
}


def render_text(report: dict) -> str:
    """Fixed-width summary of a report (envelope or bare data)."""
    data = report.get("data", report)
    tool = report.get("tool", {"name": "potnormals", "version": __version__})
    spec = data["spec"]
    lines = [
        f"{tool['name']} {tool['version']}  {data['command']}  "
        f"{spec.get('name') or '-'} ({spec['kind']}, N={spec['N']})",
    ]
    points = data.get("points")
    if points is not None:
        nerr = sum(1 for p in points if "error" in p)
        lines.append(f"points: {len(points)}  errors: {nerr}")
        cols = [c for c in _COLUMNS.get(data["command"], ()) if c in data.get("aggregate", {})]
        if cols:
            lines.append("")
            widths = [max(11, len(c)) + 2 for c in cols]
            lines.append("u".ljust(24) + "".join(c.rjust(w) for c, w in zip(cols, widths)))
            for p in points:
                u = ",".join(f"{x:.4g}" for x in p["u"])
                if "error" in p:
                    lines.append(u.ljust(24) + "  " + p["error"]["type"])
                else:
                    lines.append(u.ljust(24) + "".join(
                        _fmt(p["metrics"][c]).rjust(w) for c, w in zip(cols, widths)))
    if "error" in data:
        lines.append(f"error: {data['error']['message']}")
    if "defects" in data:
        lines.append("")
        for k, v in {**data["defects"], **data["theory"]}.items():
            lines.append(f"{k:<24}{_fmt(v)}")
    lines.append("")
    lines.append(f"{'check':<22}{'value':>12}{'limit':>12}  verdict")
    for name, c in data["checks"].items():
        lines.append(f"{name:<22}{_fmt(c['value']):>12}{_fmt(float(c['limit'])):>12}  {c['verdict']}")
    lines.append("")
    lines.append(f"verdict: {data['verdict']}")
    return "\n".join(lines) + "\n"
