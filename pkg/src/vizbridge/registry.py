"""Curated tool set exposed to the agent, plus the per-session manager state.

Each tool is a hard-coded operation with a JSON-schema parameter contract.
The schema published in ``tools/list`` is the same object used to validate
arguments at call time, so the agent never meets an undocumented constraint.
Apart from the active source and the session log, nothing is cached between
calls: every tool queries the engine fresh.
"""

from __future__ import annotations

import base64
import datetime as _dt
import hashlib
import json
import logging
import math
import os
import tempfile
from dataclasses import dataclass, field
from typing import Any, Callable

import jsonschema

from .engine import Engine, EngineError, PipelineSource, TransferFunctionError
from .engine.base import SOURCE_KINDS

log = logging.getLogger(__name__)

NUMBER = {"type": "number"}
UNIT = {"type": "number", "minimum": 0, "maximum": 1}


class ToolError(Exception):
    """A tool-level failure reported back to the agent as an error result."""


@dataclass(frozen=True)
class ParamSpec:
    name: str
    schema: dict[str, Any]
    description: str
    required: bool = True

    def to_schema(self) -> dict[str, Any]:
        return {**self.schema, "description": self.description}


@dataclass(frozen=True)
class ToolDescriptor:
    name: str
    description: str
    params: tuple[ParamSpec, ...] = ()
    returns: str = ""

    def input_schema(self) -> dict[str, Any]:
        return {
            "type": "object",
            "properties": {p.name: p.to_schema() for p in self.params},
            "required": [p.name for p in self.params if p.required],
            "additionalProperties": False,
        }

    def to_wire(self) -> dict[str, Any]:
        desc = self.description
        if self.returns:
            desc = f"{desc}\n\nReturns: {self.returns}"
        return {"name": self.name, "description": desc, "inputSchema": self.input_schema()}

    @classmethod
    def from_wire(cls, wire: dict[str, Any]) -> "ToolDescriptor":
        desc, _, returns = wire["description"].partition("\n\nReturns: ")
        schema = wire["inputSchema"]
        required = set(schema.get("required", ()))
        params = []
        for name, prop in schema.get("properties", {}).items():
            prop = dict(prop)
            pdesc = prop.pop("description")
            params.append(ParamSpec(name, prop, pdesc, name in required))
        return cls(wire["name"], desc, tuple(params), returns)


@dataclass
class ToolResult:
    """Content items in MCP wire form plus the structured payload, if any."""

    content: list[dict[str, Any]]
    is_error: bool = False
    payload: dict[str, Any] | None = None

    @classmethod
    def text(cls, prose: str, payload: dict[str, Any] | None = None, is_error: bool = False) -> "ToolResult":
        body = prose
        if payload is not None:
            body = f"{prose}\n```json\n{json.dumps(payload, indent=2, sort_keys=True)}\n```"
        return cls([{"type": "text", "text": body}], is_error, payload)

    @classmethod
    def error(cls, message: str) -> "ToolResult":
        return cls([{"type": "text", "text": f"error: {message}"}], True, None)

    @property
    def has_image(self) -> bool:
        return any(item["type"] == "image" for item in self.content)

    def text_content(self) -> str:
        return "\n".join(item["text"] for item in self.content if item["type"] == "text")

    def to_wire(self) -> dict[str, Any]:
        wire: dict[str, Any] = {"content": list(self.content), "isError": self.is_error}
        if self.payload is not None:
            wire["structuredContent"] = self.payload
        return wire

    def digest(self) -> dict[str, Any]:
        h = hashlib.sha256()
        for item in self.content:
            h.update(item.get("text", item.get("data", "")).encode("utf-8"))
        return {"sha256": h.hexdigest(), "payload": self.payload, "has_image": self.has_image}


Handler = Callable[..., ToolResult]


@dataclass
class _Tool:
    descriptor: ToolDescriptor
    handler: Handler
    validator: jsonschema.protocols.Validator


class ToolRegistry:
    def __init__(self):
        self._tools: dict[str, _Tool] = {}

    def register(self, name: str, description: str, params: tuple[ParamSpec, ...] = (), returns: str = ""):
        desc = ToolDescriptor(name, description, tuple(params), returns)

        def deco(fn: Handler) -> Handler:
            if name in self._tools:
                raise ValueError(f"duplicate tool {name!r}")
            schema = desc.input_schema()
            jsonschema.Draft202012Validator.check_schema(schema)
            self._tools[name] = _Tool(desc, fn, jsonschema.Draft202012Validator(schema))
            return fn

        return deco

    def __contains__(self, name: object) -> bool:
        return name in self._tools

    def __len__(self) -> int:
        return len(self._tools)

    def names(self) -> list[str]:
        return list(self._tools)

    def describe_tools(self) -> list[ToolDescriptor]:
        return [t.descriptor for t in self._tools.values()]

    def validate(self, name: str, arguments: Any) -> None:
        if not isinstance(arguments, dict):
            raise ToolError(f"arguments for {name!r} must be an object")
        tool = self._tools[name]
        errors = sorted(tool.validator.iter_errors(arguments), key=lambda e: list(e.absolute_path))
        if errors:
            raise ToolError(_explain(errors[0]))
        bad = _non_finite(arguments)
        if bad:
            raise ToolError(f"invalid argument `{bad}`: numbers must be finite")

    def handler(self, name: str) -> Handler:
        return self._tools[name].handler


def _path(parts) -> str:
    out = ""
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out


def _explain(err: jsonschema.ValidationError) -> str:
    where = _path(err.absolute_path)
    if err.validator == "required":
        missing = err.message.split("'")[1] if "'" in err.message else err.message
        where = _path([*err.absolute_path, missing])
        return f"missing required argument `{where}`"
    if err.validator == "additionalProperties" and not where:
        return f"unexpected argument(s): {err.message}"
    return f"invalid argument `{where or '<root>'}`: {err.message}"


def _non_finite(value: Any, path: tuple = ()) -> str | None:
    if isinstance(value, float) and not math.isfinite(value):
        return _path(path)
    if isinstance(value, dict):
        for k, v in value.items():
            found = _non_finite(v, (*path, k))
            if found:
                return found
    if isinstance(value, list):
        for i, v in enumerate(value):
            found = _non_finite(v, (*path, i))
            if found:
                return found
    return None


CURATED = ToolRegistry()
tool = CURATED.register


@dataclass
class Session:
    """One agent session: engine handle, active source, screenshots, call log."""

    engine: Engine
    screenshot_dir: str | None = None
    registry: ToolRegistry = field(default_factory=lambda: CURATED)
    log_path: str | None = None
    active_source_id: str | None = None
    session_log: list[dict[str, Any]] = field(default_factory=list)
    _shots: int = 0

    def __post_init__(self):
        if self.screenshot_dir is not None:
            os.makedirs(self.screenshot_dir, exist_ok=True)
            if self.log_path is None:
                self.log_path = os.path.join(self.screenshot_dir, "session-log.jsonl")

    # -- active source -------------------------------------------------
    def active(self) -> PipelineSource | None:
        if self.active_source_id is None:
            return None
        try:
            return self.engine.get_source(self.active_source_id)
        except EngineError:
            # removed behind our back, e.g. by the GUI client
            self.active_source_id = None
            return None

    def require_active(self, *kinds: str) -> PipelineSource:
        src = self.active()
        if src is None:
            raise ToolError("no active source; use load_data or set_active_source first")
        if kinds and src.kind not in kinds:
            raise ToolError(
                f"active source {src.name!r} is a {src.kind}; this tool needs a "
                + " or ".join(kinds)
                + " (use list_sources / set_active_source)"
            )
        return src

    def resolve(self, name_or_id: str) -> PipelineSource:
        """Exact id, then exact name, then unique case-insensitive substring."""
        sources = self.engine.list_sources()
        for rule in (
            lambda s: s.id == name_or_id,
            lambda s: s.name == name_or_id,
            lambda s: name_or_id.lower() in s.name.lower(),
        ):
            hits = [s for s in sources if rule(s)]
            if len(hits) == 1:
                return hits[0]
            if len(hits) > 1:
                listing = ", ".join(f"{s.name} ({s.id})" for s in hits)
                raise ToolError(f"{name_or_id!r} is ambiguous; matches {listing}")
        raise ToolError(f"no source matches {name_or_id!r}")

    def volume_of(self, src: PipelineSource) -> PipelineSource | None:
        if src.kind == "volume_repr":
            return src
        if src.kind != "reader":
            return None
        for s in self.engine.list_sources(kind="volume_repr"):
            if s.parent_id == src.id:
                return s
        return None

    def next_screenshot_path(self) -> str:
        if self.screenshot_dir is None:
            # never litter the working directory of an unconfigured session
            self.screenshot_dir = tempfile.mkdtemp(prefix="vizbridge-shots-")
        self._shots += 1
        return os.path.join(self.screenshot_dir, f"shot-{self._shots:04d}.png")

    # -- dispatch ------------------------------------------------------
    def call_tool(self, name: Any, arguments: Any = None) -> ToolResult:
        """Run one tool. Never raises; failures come back as error results."""
        if arguments is None:
            arguments = {}
        try:
            if not isinstance(name, str) or name not in self.registry:
                raise ToolError(f"unknown tool {name!r}; call tools/list for the available tools")
            self.registry.validate(name, arguments)
            result = self.registry.handler(name)(self, **arguments)
        except (ToolError, EngineError) as exc:
            result = ToolResult.error(str(exc))
        except Exception as exc:  # noqa: BLE001 - the agent must always get a result
            log.exception("tool %r crashed", name)
            result = ToolResult.error(f"internal error in {name!r}: {type(exc).__name__}: {exc}")
        self._append_log(name, arguments, result)
        return result

    def _append_log(self, name: Any, arguments: Any, result: ToolResult) -> None:
        entry = {
            "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
            "tool": name if isinstance(name, str) else repr(name),
            "arguments": arguments if _jsonable(arguments) else repr(arguments),
            "is_error": result.is_error,
            "digest": result.digest(),
        }
        self.session_log.append(entry)
        if self.log_path:
            try:
                with open(self.log_path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(entry, sort_keys=True) + "\n")
            except OSError:
                log.warning("could not append to session log %s", self.log_path)


def _jsonable(value: Any) -> bool:
    try:
        json.dumps(value, allow_nan=False)
        return True
    except (TypeError, ValueError):
        return False


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def _source_line(src: PipelineSource, active_id: str | None) -> str:
    mark = "*" if src.id == active_id else " "
    extra = f" value={_fmt(src.params['value'])}" if "value" in src.params else ""
    hidden = "" if src.visible else " (hidden)"
    return f"{mark} {src.name} [{src.id}] {src.kind}{extra}{hidden}"


def _listing(session: Session, sources: list[PipelineSource]) -> tuple[str, dict[str, Any]]:
    active = session.active()
    active_id = active.id if active else None
    if not sources:
        return "no sources loaded", {"sources": [], "active": active_id}
    lines = [_source_line(s, active_id) for s in sources]
    return "\n".join(lines), {"sources": [s.to_dict() for s in sources], "active": active_id}


# ---------------------------------------------------------------------------
# tools
# ---------------------------------------------------------------------------

FIELD_SCHEMA = {
    "type": "object",
    "properties": {
        "family": {"enum": ["radial", "linear_x", "shells"]},
        "center": {"type": "array", "items": UNIT, "minItems": 3, "maxItems": 3},
        "shell_period": {"type": "number", "exclusiveMinimum": 0},
    },
    "required": ["family"],
    "additionalProperties": False,
}

NAME_OR_ID = ParamSpec(
    "name_or_id",
    {"type": "string", "minLength": 1},
    "Source id, exact name, or a case-insensitive name fragment matching exactly one source.",
)


@tool(
    "load_data",
    "Load a dataset and make it the active source. Use this first. On the mock "
    "backend `dataset` is either a path to a JSON field file or an inline field "
    "spec such as {\"family\": \"radial\"}.",
    (
        ParamSpec(
            "dataset",
            {"oneOf": [{"type": "string", "minLength": 1}, FIELD_SCHEMA]},
            "File path, or an analytic field spec object (family radial | linear_x | shells, "
            "optional center in [0,1]^3, optional shell_period > 0).",
        ),
    ),
    "the new reader's name, id and scalar range, followed by the source listing",
)
def load_data(session: Session, dataset: Any) -> ToolResult:
    src = session.engine.load_dataset(dataset)
    session.active_source_id = src.id
    lo, hi = session.engine.scalar_range(src.id)
    listing, payload = _listing(session, session.engine.list_sources())
    payload.update(source=src.to_dict(), range=[lo, hi])
    return ToolResult.text(
        f"loaded reader {src.name!r} ({src.id}), scalar range [{lo:.4g}, {hi:.4g}]\n{listing}", payload
    )


@tool(
    "list_sources",
    "List pipeline sources in creation order; the active one is marked with '*'. "
    "Optionally filter by kind or by a name fragment.",
    (
        ParamSpec("kind", {"enum": list(SOURCE_KINDS)}, "Only sources of this kind.", required=False),
        ParamSpec("name", {"type": "string"}, "Only sources whose name contains this text.", required=False),
    ),
    "one line per source plus a structured listing",
)
def list_sources(session: Session, kind: str | None = None, name: str | None = None) -> ToolResult:
    text, payload = _listing(session, session.engine.list_sources(kind=kind, name=name))
    return ToolResult.text(text, payload)


@tool("get_active_source", "Report which source tools currently operate on.", (), "the active source, if any")
def get_active_source(session: Session) -> ToolResult:
    src = session.active()
    if src is None:
        return ToolResult.text("no active source", {"active": None})
    return ToolResult.text(f"active source: {_source_line(src, src.id)[2:]}", {"active": src.to_dict()})


@tool(
    "set_active_source",
    "Select the source that subsequent tools act on.",
    (NAME_OR_ID,),
    "the newly active source",
)
def set_active_source(session: Session, name_or_id: str) -> ToolResult:
    src = session.resolve(name_or_id)
    session.active_source_id = src.id
    return ToolResult.text(f"active source: {src.name} ({src.kind})", {"active": src.to_dict()})


def _area_or_none(session: Session, sid: str) -> float | None:
    try:
        return session.engine.surface_area(sid)
    except EngineError:
        return None


@tool(
    "create_isosurface",
    "Extract an isosurface (contour) from the active reader at one isovalue. The "
    "new contour becomes active. Check get_scalar_range first.",
    (
        ParamSpec(
            "value", NUMBER,
            "Isovalue; must lie strictly inside the active reader's scalar range.",
        ),
    ),
    "the contour source and its surface area where defined",
)
def create_isosurface(session: Session, value: float) -> ToolResult:
    reader = session.require_active("reader")
    src = session.engine.create_contour(reader.id, value)
    session.active_source_id = src.id
    area = _area_or_none(session, src.id)
    payload = {"source": src.to_dict(), "value": src.params["value"], "area": area}
    note = f", surface area {_fmt(area)}" if area is not None else ""
    return ToolResult.text(f"created {src.name!r} ({src.id}) at isovalue {_fmt(value)}{note}", payload)


@tool(
    "update_isosurface",
    "Change the isovalue of the active contour.",
    (ParamSpec("value", NUMBER, "New isovalue; strictly inside the parent reader's scalar range."),),
    "the updated contour",
)
def update_isosurface(session: Session, value: float) -> ToolResult:
    src = session.require_active("contour")
    src = session.engine.set_contour_value(src.id, value)
    return ToolResult.text(
        f"{src.name!r} isovalue set to {_fmt(src.params['value'])}",
        {"source": src.to_dict(), "value": src.params["value"]},
    )


@tool(
    "get_surface_area",
    "Measure the surface area of the active contour, in squared domain units.",
    (),
    "the area and the isovalue it was measured at",
)
def get_surface_area(session: Session) -> ToolResult:
    src = session.require_active("contour")
    value, area = session.engine.measure_contour(src.id)
    return ToolResult.text(
        f"surface area of {src.name!r} at isovalue {_fmt(value)}: {_fmt(area)}",
        {"source_id": src.id, "value": value, "area": area},
    )


@tool(
    "get_scalar_range",
    "Report the data range of the active source's dataset and the isovalue "
    "interval where surface area can be measured.",
    (),
    "range [lo, hi] and area_domain [lo, hi]",
)
def get_scalar_range(session: Session) -> ToolResult:
    src = session.require_active()
    lo, hi = session.engine.scalar_range(src.id)
    dlo, dhi = session.engine.area_domain(src.id)
    return ToolResult.text(
        f"scalar range of {src.name!r}: [{_fmt(lo)}, {_fmt(hi)}]; surface area defined for "
        f"isovalues in ({_fmt(dlo)}, {_fmt(dhi)}]",
        {"source_id": src.id, "range": [lo, hi], "area_domain": [dlo, dhi]},
    )


@tool(
    "get_histogram",
    "Histogram of the active source's scalar values, to judge the value distribution "
    "before choosing isovalues or colors.",
    (ParamSpec("bins", {"type": "integer", "minimum": 1, "maximum": 1024}, "Number of equal-width bins (1-1024)."),),
    "per-bin [lo, hi) and sample counts",
)
def get_histogram(session: Session, bins: int) -> ToolResult:
    src = session.require_active()
    hist = session.engine.histogram(src.id, int(bins))
    total = sum(c for _, _, c in hist)
    lines = [f"[{_fmt(lo)}, {_fmt(hi)}): {c}" for lo, hi, c in hist]
    return ToolResult.text(
        f"histogram of {src.name!r} ({total} samples)\n" + "\n".join(lines),
        {"source_id": src.id, "total": total, "bins": [{"lo": lo, "hi": hi, "count": c} for lo, hi, c in hist]},
    )


@tool(
    "toggle_volume_rendering",
    "Turn volume rendering of the active reader on (creating it with a default "
    "blue-to-red transfer function) or flip its visibility if it already exists.",
    (),
    "the volume representation and whether it is visible",
)
def toggle_volume_rendering(session: Session) -> ToolResult:
    reader = session.require_active("reader")
    vol = session.volume_of(reader)
    if vol is None:
        vol = session.engine.enable_volume_rendering(reader.id)
        msg = f"volume rendering enabled for {reader.name!r} as {vol.name!r}"
    else:
        vol = session.engine.set_visibility(vol.id, not vol.visible)
        msg = f"volume rendering of {reader.name!r} {'shown' if vol.visible else 'hidden'}"
    tf = session.engine.get_transfer_function(vol.id)
    return ToolResult.text(msg, {"source": vol.to_dict(), "transfer_function": tf.to_dict()})


def _volume_for_active(session: Session) -> PipelineSource:
    src = session.require_active("reader", "volume_repr")
    vol = session.volume_of(src)
    if vol is None:
        raise ToolError(f"{src.name!r} has no volume representation; call toggle_volume_rendering first")
    return vol


def _point_error(exc: TransferFunctionError) -> ToolError:
    return ToolError(f"{exc} (offending index {exc.index})" if exc.index is not None else str(exc))


@tool(
    "get_transfer_function",
    "Show the color and opacity control points of the active volume.",
    (),
    "the transfer function as color_points [scalar, r, g, b] and opacity_points [scalar, alpha]",
)
def get_transfer_function(session: Session) -> ToolResult:
    vol = _volume_for_active(session)
    tf = session.engine.get_transfer_function(vol.id)
    lines = [f"color {p}" for p in tf.color_points] + [f"opacity {p}" for p in tf.opacity_points]
    return ToolResult.text(
        f"transfer function of {vol.name!r}:\n" + "\n".join(lines),
        {"source_id": vol.id, "transfer_function": tf.to_dict()},
    )


@tool(
    "set_color_map",
    "Replace every color control point of the active volume's transfer function. "
    "Colors are interpolated linearly between points.",
    (
        ParamSpec(
            "points",
            {
                "type": "array",
                "minItems": 2,
                "items": {"type": "array", "prefixItems": [NUMBER, UNIT, UNIT, UNIT], "items": False, "minItems": 4},
            },
            "At least two [scalar, r, g, b] points; r, g, b in [0, 1]; scalars strictly "
            "increasing and within the data range.",
        ),
    ),
    "acknowledgement and the resulting transfer function",
)
def set_color_map(session: Session, points: list) -> ToolResult:
    vol = _volume_for_active(session)
    try:
        tf = session.engine.get_transfer_function(vol.id).with_color_points(points)
        session.engine.set_transfer_function(vol.id, tf)
    except TransferFunctionError as exc:
        raise _point_error(exc) from None
    return ToolResult.text(
        f"color map of {vol.name!r} set ({len(points)} points)", {"source_id": vol.id, "transfer_function": tf.to_dict()}
    )


@tool(
    "set_opacity_map",
    "Replace every opacity control point of the active volume's transfer function.",
    (
        ParamSpec(
            "points",
            {
                "type": "array",
                "minItems": 2,
                "items": {"type": "array", "prefixItems": [NUMBER, UNIT], "items": False, "minItems": 2},
            },
            "At least two [scalar, alpha] points; alpha in [0, 1]; scalars strictly increasing "
            "and within the data range.",
        ),
    ),
    "acknowledgement and the resulting transfer function",
)
def set_opacity_map(session: Session, points: list) -> ToolResult:
    vol = _volume_for_active(session)
    try:
        tf = session.engine.get_transfer_function(vol.id).with_opacity_points(points)
        session.engine.set_transfer_function(vol.id, tf)
    except TransferFunctionError as exc:
        raise _point_error(exc) from None
    return ToolResult.text(
        f"opacity map of {vol.name!r} set ({len(points)} points)", {"source_id": vol.id, "transfer_function": tf.to_dict()}
    )


@tool(
    "take_screenshot",
    "Render the current view and return it as an image so you can inspect the "
    "result. The PNG is also saved to the screenshot directory.",
    (),
    "a PNG image and the saved file path",
)
def take_screenshot(session: Session) -> ToolResult:
    cap = session.engine.render()
    path = session.next_screenshot_path()
    with open(path, "wb") as fh:
        fh.write(cap.png)
    payload: dict[str, Any] = {"path": path, "width": cap.width, "height": cap.height}
    prose = f"screenshot saved to {path} ({cap.width}x{cap.height})"
    bands = cap.band_report_dicts()
    if bands is not None:
        payload["band_report"] = bands
        prose += "\nband colors (scalar range: r g b alpha):\n" + "\n".join(
            f"[{_fmt(b['scalar_lo'])}, {_fmt(b['scalar_hi'])}]: {b['mean_r']:.3f} {b['mean_g']:.3f} "
            f"{b['mean_b']:.3f} {b['mean_alpha']:.3f}"
            for b in bands
        )
    text = ToolResult.text(prose, payload)
    image = {"type": "image", "data": base64.b64encode(cap.png).decode("ascii"), "mimeType": "image/png"}
    return ToolResult([image, *text.content], False, payload)


@tool("reset_camera", "Reset the camera to its initial view.", (), "the camera state")
def reset_camera(session: Session) -> ToolResult:
    cam = session.engine.reset_camera()
    return ToolResult.text("camera reset", {"camera": cam})


@tool(
    "rotate_camera",
    "Orbit the camera around the scene.",
    (
        ParamSpec("azimuth", NUMBER, "Degrees to rotate about the view-up axis."),
        ParamSpec("elevation", NUMBER, "Degrees to rotate up or down; clamped to [-90, 90] overall.", required=False),
    ),
    "the camera state",
)
def rotate_camera(session: Session, azimuth: float, elevation: float = 0.0) -> ToolResult:
    cam = session.engine.orbit(azimuth, elevation)
    return ToolResult.text("camera rotated", {"camera": cam})


@tool(
    "set_visibility",
    "Show or hide a source in the view.",
    (NAME_OR_ID, ParamSpec("visible", {"type": "boolean"}, "True to show, false to hide.")),
    "the updated source",
)
def set_visibility(session: Session, name_or_id: str, visible: bool) -> ToolResult:
    src = session.engine.set_visibility(session.resolve(name_or_id).id, visible)
    return ToolResult.text(f"{src.name!r} {'shown' if visible else 'hidden'}", {"source": src.to_dict()})


@tool(
    "delete_source",
    "Delete a source. Sources that feed other sources must have their dependents deleted first.",
    (NAME_OR_ID,),
    "acknowledgement; notes when the active source was cleared",
)
def delete_source(session: Session, name_or_id: str) -> ToolResult:
    src = session.resolve(name_or_id)
    was_active = session.active_source_id == src.id
    session.engine.delete_source(src.id)
    msg = f"deleted {src.name!r} ({src.id})"
    if was_active:
        session.active_source_id = None
        msg += "; active source cleared"
    return ToolResult.text(msg, {"deleted": src.id, "active_cleared": was_active})


@tool("describe_tools", "Describe every available tool and its parameters.", (), "the tool catalogue")
def describe_tools(session: Session) -> ToolResult:
    lines = []
    for d in session.registry.describe_tools():
        params = ", ".join(f"{p.name}{'' if p.required else '?'}" for p in d.params)
        lines.append(f"{d.name}({params}): {d.description}")
    return ToolResult.text("\n".join(lines))
