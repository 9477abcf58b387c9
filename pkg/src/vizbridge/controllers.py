"""Closed-loop goal controllers that act only through the agent-visible tools.

``solve_iso_area`` finds an isovalue whose surface area hits a fraction of a
reference area (scan for a bracket, then bisect). ``refine_transfer_function``
pulls the rendered color of chosen scalar bands toward target colors using
render feedback, stepping halfway toward the target each round.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Protocol, Sequence

from .registry import ToolResult

SCAN_POINTS = 16
STEP_FACTOR = 0.5


class ControllerError(Exception):
    """The goal cannot be pursued; ``details`` carries supporting data."""

    def __init__(self, message: str, details: Any = None):
        super().__init__(message)
        self.details = details


class UnattainableError(ControllerError):
    pass


class NonMonotoneError(ControllerError):
    pass


class FeedbackError(ControllerError):
    pass


class ToolSurface(Protocol):
    def call_tool(self, name: str, arguments: dict[str, Any] | None = None) -> ToolResult: ...


@dataclass
class Iteration:
    params: dict[str, Any]
    measurement: dict[str, Any]
    error: float


@dataclass
class RefinementTrace:
    iterations: list[Iteration] = field(default_factory=list)
    converged: bool = False
    final: dict[str, Any] | None = None

    def best_so_far(self) -> list[float]:
        out, best = [], float("inf")
        for it in self.iterations:
            best = min(best, it.error)
            out.append(best)
        return out

    def to_dict(self) -> dict[str, Any]:
        return {
            "iterations": [asdict(it) for it in self.iterations],
            "converged": self.converged,
            "final": self.final,
        }


@dataclass
class AreaGoal:
    contour_id: str
    reference_area: float
    target_fraction: float
    rel_tol: float = 0.01
    max_iters: int = 30

    def __post_init__(self):
        if not 0 < self.target_fraction <= 1:
            raise ValueError(f"target_fraction must be in (0, 1], got {self.target_fraction}")
        if not self.reference_area > 0:
            raise ValueError(f"reference_area must be positive, got {self.reference_area}")
        if self.max_iters < SCAN_POINTS:
            raise ValueError(f"max_iters must allow the {SCAN_POINTS}-point scan")

    @property
    def target(self) -> float:
        return self.target_fraction * self.reference_area


@dataclass
class BandColorGoal:
    # (scalar_lo, scalar_hi, (r, g, b))
    bands: list[tuple[float, float, tuple[float, float, float]]]
    color_tol: float = 0.05
    max_iters: int = 10

    def __post_init__(self):
        self.bands = [(float(lo), float(hi), tuple(float(c) for c in rgb)) for lo, hi, rgb in self.bands]
        if not self.bands:
            raise ValueError("at least one band is required")
        ordered = sorted(self.bands)
        for lo, hi, rgb in ordered:
            if not lo < hi:
                raise ValueError(f"band [{lo}, {hi}] is empty")
            if len(rgb) != 3 or not all(0 <= c <= 1 for c in rgb):
                raise ValueError(f"band [{lo}, {hi}] target {rgb} must be three values in [0, 1]")
        for (_, a_hi, _), (b_lo, _, _) in zip(ordered, ordered[1:]):
            if not a_hi < b_lo:
                raise ValueError("bands must not overlap or touch")


def _payload(result: ToolResult, what: str) -> dict[str, Any]:
    if result.is_error or result.payload is None:
        raise ControllerError(f"{what} failed: {result.text_content()}")
    return result.payload


# ---------------------------------------------------------------------------
# isovalue search
# ---------------------------------------------------------------------------

def solve_iso_area(goal: AreaGoal, tools: ToolSurface) -> tuple[float, RefinementTrace]:
    """Find an isovalue whose contour area is ``target_fraction`` of the reference.

    Scans 16 cell-centered isovalues across the interval where area is
    defined, then bisects the first bracketing pair. Every area evaluation is
    an ``update_isosurface`` + ``get_surface_area`` tool pair.
    """
    _payload(tools.call_tool("set_active_source", {"name_or_id": goal.contour_id}), "selecting the contour")
    dlo, dhi = _payload(tools.call_tool("get_scalar_range"), "querying the range")["area_domain"]
    target = goal.target
    trace = RefinementTrace()

    def evaluate(v: float) -> float:
        _payload(tools.call_tool("update_isosurface", {"value": v}), f"setting isovalue {v:.6g}")
        area = _payload(tools.call_tool("get_surface_area"), f"measuring area at {v:.6g}")["area"]
        trace.iterations.append(Iteration({"value": v}, {"area": area}, abs(area - target) / target))
        return area

    def finish(v: float, converged: bool) -> tuple[float, RefinementTrace]:
        if trace.iterations[-1].params["value"] != v:
            _payload(tools.call_tool("update_isosurface", {"value": v}), "applying the result")
        trace.converged = converged
        trace.final = {"value": v}
        return v, trace

    width = dhi - dlo
    scan = [dlo + width * (k + 0.5) / SCAN_POINTS for k in range(SCAN_POINTS)]
    areas = [evaluate(v) for v in scan]

    hits = [it for it in trace.iterations if it.error <= goal.rel_tol]
    if hits:
        return finish(min(hits, key=lambda it: it.error).params["value"], True)

    bracket = None
    for i in range(SCAN_POINTS - 1):
        if (areas[i] - target) * (areas[i + 1] - target) < 0:
            bracket = i
            break
    if bracket is None:
        table = [[v, a] for v, a in zip(scan, areas)]
        raise UnattainableError(
            f"target unattainable: area {target:.6g} is not bracketed by any scanned isovalue", table
        )

    lo, hi = scan[bracket], scan[bracket + 1]
    a_lo, a_hi = areas[bracket], areas[bracket + 1]
    while len(trace.iterations) < goal.max_iters:
        mid = 0.5 * (lo + hi)
        a = evaluate(mid)
        if not min(a_lo, a_hi) <= a <= max(a_lo, a_hi):
            raise NonMonotoneError(
                f"area at {mid:.6g} ({a:.6g}) falls outside the bracket [{a_lo:.6g}, {a_hi:.6g}]; "
                "the area is not monotone here, explore isovalues manually",
                [[lo, a_lo], [mid, a], [hi, a_hi]],
            )
        if trace.iterations[-1].error <= goal.rel_tol:
            return finish(mid, True)
        if (a - target) * (a_lo - target) > 0:
            lo, a_lo = mid, a
        else:
            hi, a_hi = mid, a

    best = min(trace.iterations, key=lambda it: it.error)
    return finish(best.params["value"], False)


# ---------------------------------------------------------------------------
# transfer-function refinement
# ---------------------------------------------------------------------------

Evaluator = Callable[[ToolResult, Sequence[tuple[float, float]]], list[tuple[float, float, float]]]


def band_report_evaluator(shot: ToolResult, bands: Sequence[tuple[float, float]]) -> list[tuple[float, float, float]]:
    """Measure each band's color from the mock renderer's band report.

    Render stripes whose midpoint falls inside a band are averaged; a band
    narrower than one stripe uses the stripe containing its midpoint. Colors
    are un-composited (divided by opacity) so they judge the hue the transfer
    function assigns, independent of how transparent the band is.
    """
    report = (shot.payload or {}).get("band_report")
    if not report:
        raise FeedbackError("no feedback channel: screenshot has no band report and no vision evaluator is set")
    out = []
    for lo, hi in bands:
        rows = [b for b in report if lo <= 0.5 * (b["scalar_lo"] + b["scalar_hi"]) <= hi]
        if not rows:
            mid = 0.5 * (lo + hi)
            rows = [min(report, key=lambda b: abs(0.5 * (b["scalar_lo"] + b["scalar_hi"]) - mid))]
        colors = []
        for b in rows:
            if b["mean_alpha"] <= 0:
                raise FeedbackError(
                    f"band [{lo:.4g}, {hi:.4g}] is fully transparent; its color cannot be judged"
                )
            colors.append([b[k] / b["mean_alpha"] for k in ("mean_r", "mean_g", "mean_b")])
        out.append(tuple(sum(c[i] for c in colors) / len(colors) for i in range(3)))
    return out


def _plateau(points: list[list[float]], lo: float, hi: float, rgb: Sequence[float]) -> list[list[float]]:
    kept = [p for p in points if not lo <= p[0] <= hi]
    rgb = [min(1.0, max(0.0, c)) for c in rgb]
    kept += [[s, *rgb] for s in (lo, 0.5 * (lo + hi), hi)]
    return sorted(kept, key=lambda p: p[0])


def refine_transfer_function(
    goal: BandColorGoal, tools: ToolSurface, evaluator: Evaluator | None = None
) -> tuple[dict[str, Any], RefinementTrace]:
    """Steer band colors toward their targets via render feedback.

    Each round: screenshot, measure every goal band, stop if the worst
    per-channel deviation is within ``color_tol``; otherwise make each band a
    flat color plateau, moving violating bands halfway toward their target,
    and apply the whole color map at once.
    """
    evaluator = evaluator or band_report_evaluator
    tf = _payload(tools.call_tool("get_transfer_function"), "reading the transfer function")["transfer_function"]
    lo, hi = _payload(tools.call_tool("get_scalar_range"), "querying the range")["range"]

    bands = []
    for b_lo, b_hi, rgb in goal.bands:
        if b_hi <= lo or b_lo >= hi:
            raise ControllerError(f"band [{b_lo:.4g}, {b_hi:.4g}] lies outside the scalar range [{lo:.4g}, {hi:.4g}]")
        bands.append((max(b_lo, lo), min(b_hi, hi), rgb))
    spans = [(b_lo, b_hi) for b_lo, b_hi, _ in bands]

    trace = RefinementTrace()
    for it in range(goal.max_iters):
        shot = tools.call_tool("take_screenshot")
        _payload(shot, "rendering")
        measured = evaluator(shot, spans)
        devs = [max(abs(m - t) for m, t in zip(mc, rgb)) for mc, (_, _, rgb) in zip(measured, bands)]
        err = max(devs)
        trace.iterations.append(
            Iteration(
                {"transfer_function": tf},
                {"bands": [{"lo": s[0], "hi": s[1], "color": list(m)} for s, m in zip(spans, measured)]},
                err,
            )
        )
        if err <= goal.color_tol:
            trace.converged = True
            break
        if it == goal.max_iters - 1:
            break
        points = [list(p) for p in tf["color_points"]]
        for (b_lo, b_hi, rgb), mc, dev in zip(bands, measured, devs):
            color = mc if dev <= goal.color_tol else [m + STEP_FACTOR * (t - m) for m, t in zip(mc, rgb)]
            points = _plateau(points, b_lo, b_hi, color)
        tf = _payload(tools.call_tool("set_color_map", {"points": points}), "applying the color map")[
            "transfer_function"
        ]
    trace.final = {"transfer_function": tf}
    return tf, trace
