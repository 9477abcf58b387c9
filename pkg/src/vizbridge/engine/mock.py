"""Deterministic in-memory engine over analytic scalar fields on the unit cube.

Areas are closed form, histograms are taken over a fixed 64^3 cell-centered
lattice, and "rendering" paints the transfer function as eight horizontal
stripes so every image can be checked against the state that produced it.
"""

from __future__ import annotations

import io
import json
import math
import os
from dataclasses import dataclass
from typing import Any

import numpy as np
from PIL import Image
from PIL.PngImagePlugin import PngInfo

from .base import (
    ApplicabilityError,
    Engine,
    EngineError,
    PipelineSource,
    RenderCapture,
    TransferFunction,
    TransferFunctionError,
    serialized,
)

FAMILIES = ("radial", "linear_x", "shells")
LATTICE_N = 64
RENDER_BANDS = 8
RENDER_WIDTH = 256
RENDER_HEIGHT = 256
# transfer-function points may overshoot the data range by this fraction of its width
RANGE_SLACK = 0.01

_CORNERS = np.array([[x, y, z] for x in (0, 1) for y in (0, 1) for z in (0, 1)], dtype=float)


@dataclass(frozen=True)
class FieldSpec:
    """An analytic scalar field over the unit cube.

    * ``radial``: distance to ``center``.
    * ``linear_x``: the x coordinate.
    * ``shells``: distance to ``center`` modulo ``shell_period`` (nested spheres).
    """

    family: str
    center: tuple[float, float, float] = (0.5, 0.5, 0.5)
    shell_period: float = 0.25

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise EngineError(f"unknown field family {self.family!r}; expected one of {FAMILIES}")
        c = tuple(float(v) for v in self.center)
        if len(c) != 3 or not all(0.0 <= v <= 1.0 for v in c):
            raise EngineError(f"field center must be a point in [0,1]^3, got {self.center!r}")
        object.__setattr__(self, "center", c)
        if not (math.isfinite(self.shell_period) and self.shell_period > 0):
            raise EngineError(f"shell_period must be positive, got {self.shell_period!r}")

    @classmethod
    def from_dict(cls, data: Any) -> "FieldSpec":
        if not isinstance(data, dict) or "family" not in data:
            raise EngineError("field spec must be an object with a 'family' key")
        unknown = set(data) - {"family", "center", "shell_period"}
        if unknown:
            raise EngineError(f"unknown field spec keys: {sorted(unknown)}")
        try:
            return cls(
                family=data["family"],
                center=tuple(data.get("center", (0.5, 0.5, 0.5))),
                shell_period=float(data.get("shell_period", 0.25)),
            )
        except (TypeError, ValueError) as exc:
            raise EngineError(f"invalid field spec: {exc}") from None

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"family": self.family}
        if self.family != "linear_x":
            d["center"] = list(self.center)
        if self.family == "shells":
            d["shell_period"] = self.shell_period
        return d

    @property
    def max_distance(self) -> float:
        return float(np.max(np.linalg.norm(_CORNERS - np.array(self.center), axis=1)))

    @property
    def face_distance(self) -> float:
        """Radius of the largest sphere about ``center`` that fits in the cube."""
        return min(min(c, 1.0 - c) for c in self.center)

    def values(self, points: np.ndarray) -> np.ndarray:
        if self.family == "linear_x":
            return points[..., 0]
        r = np.linalg.norm(points - np.array(self.center), axis=-1)
        if self.family == "radial":
            return r
        return np.mod(r, self.shell_period)

    def scalar_range(self) -> tuple[float, float]:
        if self.family == "linear_x":
            return 0.0, 1.0
        if self.family == "radial":
            return 0.0, self.max_distance
        return 0.0, min(self.shell_period, self.max_distance)

    def area_domain(self) -> tuple[float, float]:
        if self.family == "radial":
            return 0.0, self.face_distance
        return self.scalar_range()

    def area(self, v: float) -> float:
        if self.family == "linear_x":
            return 1.0
        if self.family == "radial":
            if v > self.face_distance:
                raise EngineError(
                    f"area undefined for clipped regime: isovalue {v:.6g} exceeds "
                    f"{self.face_distance:.6g}, where the sphere leaves the domain"
                )
            return 4.0 * math.pi * v * v
        # every whole shell at this level; clipped shells are not counted
        total = 0.0
        r = v
        while r <= self.face_distance:
            total += 4.0 * math.pi * r * r
            r += self.shell_period
        return total

    def lattice_values(self) -> np.ndarray:
        ticks = (np.arange(LATTICE_N) + 0.5) / LATTICE_N
        grid = np.stack(np.meshgrid(ticks, ticks, ticks, indexing="ij"), axis=-1)
        return self.values(grid).ravel()


def load_field_file(path: str) -> FieldSpec:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, ValueError) as exc:
        raise EngineError(f"cannot read dataset {path!r}: {exc}") from None
    return FieldSpec.from_dict(data)


class MockEngine(Engine):
    name = "mock"

    def __init__(self):
        super().__init__()
        self._sources: dict[str, dict[str, Any]] = {}
        self._fields: dict[str, FieldSpec] = {}
        self._tfs: dict[str, TransferFunction] = {}
        self._next_id = 1
        self._name_counts: dict[str, int] = {}
        self._camera = self._initial_camera()

    @staticmethod
    def _initial_camera() -> dict[str, float]:
        return {"azimuth": 0.0, "elevation": 0.0}

    def _new_source(self, prefix: str, kind: str, params: dict, parent_id: str | None) -> PipelineSource:
        sid = f"src-{self._next_id}"
        self._next_id += 1
        n = self._name_counts.get(prefix, 0) + 1
        self._name_counts[prefix] = n
        self._sources[sid] = {
            "id": sid,
            "name": f"{prefix}-{n}",
            "kind": kind,
            "params": params,
            "parent_id": parent_id,
            "visible": True,
        }
        return self._freeze(sid)

    def _freeze(self, sid: str) -> PipelineSource:
        s = self._sources[sid]
        return PipelineSource(s["id"], s["name"], s["kind"], dict(s["params"]), s["parent_id"], s["visible"])

    def _node(self, sid: str) -> dict[str, Any]:
        try:
            return self._sources[sid]
        except (KeyError, TypeError):
            raise EngineError(f"unknown source id {sid!r}") from None

    def _field_of(self, sid: str) -> FieldSpec:
        node = self._node(sid)
        while node["parent_id"] is not None:
            node = self._node(node["parent_id"])
        return self._fields[node["id"]]

    def _require_kind(self, sid: str, kind: str, op: str) -> dict[str, Any]:
        node = self._node(sid)
        if node["kind"] != kind:
            raise ApplicabilityError(
                f"{op} applies to {kind} sources, but {node['name']!r} is a {node['kind']}"
            )
        return node

    def _check_value(self, sid: str, value: float) -> float:
        value = float(value)
        lo, hi = self._field_of(sid).scalar_range()
        if not (math.isfinite(value) and lo < value < hi):
            raise EngineError(
                f"isovalue {value:.6g} outside the scalar range [{lo:.4g}, {hi:.4g}]; "
                "choose a value strictly inside it"
            )
        return value

    @serialized
    def load_dataset(self, spec: Any) -> PipelineSource:
        if isinstance(spec, FieldSpec):
            field, prefix = spec, spec.family
        elif isinstance(spec, dict):
            field, prefix = FieldSpec.from_dict(spec), spec.get("family", "field")
        elif isinstance(spec, str):
            if not os.path.isfile(spec):
                raise EngineError(f"cannot read dataset {spec!r}: no such file")
            field = load_field_file(spec)
            prefix = os.path.splitext(os.path.basename(spec))[0] or "dataset"
        else:
            raise EngineError(f"cannot read dataset {spec!r}")
        src = self._new_source(prefix, "reader", {"field": field.to_dict()}, None)
        self._fields[src.id] = field
        return src

    @serialized
    def list_sources(self, kind: str | None = None, name: str | None = None) -> list[PipelineSource]:
        out = []
        for sid, s in self._sources.items():
            if kind is not None and s["kind"] != kind:
                continue
            if name is not None and name.lower() not in s["name"].lower():
                continue
            out.append(self._freeze(sid))
        return out

    @serialized
    def get_source(self, source_id: str) -> PipelineSource:
        self._node(source_id)
        return self._freeze(source_id)

    @serialized
    def create_contour(self, parent_id: str, value: float) -> PipelineSource:
        self._require_kind(parent_id, "reader", "contour")
        value = self._check_value(parent_id, value)
        return self._new_source("isosurface", "contour", {"value": value}, parent_id)

    @serialized
    def set_contour_value(self, source_id: str, value: float) -> PipelineSource:
        node = self._require_kind(source_id, "contour", "set_contour_value")
        node["params"]["value"] = self._check_value(source_id, value)
        return self._freeze(source_id)

    @serialized
    def surface_area(self, source_id: str) -> float:
        node = self._require_kind(source_id, "contour", "surface_area")
        return self._field_of(source_id).area(node["params"]["value"])

    @serialized
    def area_domain(self, source_id: str) -> tuple[float, float]:
        self._node(source_id)
        return self._field_of(source_id).area_domain()

    @serialized
    def scalar_range(self, source_id: str) -> tuple[float, float]:
        return self._field_of(source_id).scalar_range()

    @serialized
    def histogram(self, source_id: str, bins: int) -> list[tuple[float, float, int]]:
        if isinstance(bins, bool) or not isinstance(bins, int) or bins < 1:
            raise EngineError(f"bins must be a positive integer, got {bins!r}")
        field = self._field_of(source_id)
        lo, hi = field.scalar_range()
        counts, edges = np.histogram(field.lattice_values(), bins=bins, range=(lo, hi))
        return [(float(edges[i]), float(edges[i + 1]), int(counts[i])) for i in range(bins)]

    @serialized
    def enable_volume_rendering(self, source_id: str) -> PipelineSource:
        node = self._require_kind(source_id, "reader", "volume rendering")
        for s in self._sources.values():
            if s["kind"] == "volume_repr" and s["parent_id"] == source_id:
                raise EngineError(
                    f"volume representation already exists for {node['name']!r} ({s['name']!r})"
                )
        src = self._new_source("volume", "volume_repr", {}, source_id)
        self._tfs[src.id] = TransferFunction.ramp(*self._field_of(source_id).scalar_range())
        return src

    @serialized
    def get_transfer_function(self, source_id: str) -> TransferFunction:
        self._require_kind(source_id, "volume_repr", "transfer functions")
        return self._tfs[source_id]

    @serialized
    def set_transfer_function(self, source_id: str, tf: TransferFunction) -> None:
        self._require_kind(source_id, "volume_repr", "transfer functions")
        lo, hi = self._field_of(source_id).scalar_range()
        slack = RANGE_SLACK * (hi - lo)
        for which, points in (("color", tf.color_points), ("opacity", tf.opacity_points)):
            for i, p in enumerate(points):
                if not lo - slack <= p[0] <= hi + slack:
                    raise TransferFunctionError(
                        f"{which} point {i}: scalar {p[0]:.6g} outside the data range "
                        f"[{lo:.4g}, {hi:.4g}]",
                        i,
                        which,
                    )
        self._tfs[source_id] = tf

    @serialized
    def render(self) -> RenderCapture:
        visible = [s for s in self._sources.values() if s["visible"]]
        if not visible:
            raise EngineError("nothing to render: no visible sources")
        volumes = [s for s in visible if s["kind"] == "volume_repr"]
        target = (volumes or visible)[-1]
        lo, hi = self._field_of(target["id"]).scalar_range()
        tf = self._tfs[target["id"]] if target["kind"] == "volume_repr" else TransferFunction.ramp(lo, hi)

        edges = np.linspace(lo, hi, RENDER_BANDS + 1)
        report = []
        pixels = np.zeros((RENDER_HEIGHT, RENDER_WIDTH, 3), dtype=np.uint8)
        rows = RENDER_HEIGHT // RENDER_BANDS
        for i in range(RENDER_BANDS):
            b_lo, b_hi = float(edges[i]), float(edges[i + 1])
            mid = 0.5 * (b_lo + b_hi)
            r, g, b = tf.color(mid)
            a = tf.opacity(mid)
            # composited over black
            rgb = (a * r, a * g, a * b)
            report.append((b_lo, b_hi, *rgb, a))
            top = RENDER_HEIGHT - (i + 1) * rows  # band 0 at the bottom
            pixels[top : top + rows, :, :] = np.round(np.clip(rgb, 0.0, 1.0) * 255).astype(np.uint8)

        info = PngInfo()
        info.add_text("vizbridge:camera", json.dumps(self._camera, sort_keys=True))
        info.add_text(
            "vizbridge:scene",
            json.dumps(
                {"visible": [s["id"] for s in visible], "params": [s["params"] for s in visible],
                 "target": target["id"], "tf": tf.to_dict()},
                sort_keys=True,
            ),
        )
        buf = io.BytesIO()
        Image.fromarray(pixels, "RGB").save(buf, format="PNG", pnginfo=info)
        return RenderCapture(RENDER_WIDTH, RENDER_HEIGHT, buf.getvalue(), tuple(report))

    @serialized
    def reset_camera(self) -> dict[str, float]:
        self._camera = self._initial_camera()
        return dict(self._camera)

    @serialized
    def orbit(self, azimuth_deg: float, elevation_deg: float) -> dict[str, float]:
        az = (self._camera["azimuth"] + float(azimuth_deg)) % 360.0
        el = min(90.0, max(-90.0, self._camera["elevation"] + float(elevation_deg)))
        self._camera = {"azimuth": az + 0.0, "elevation": el + 0.0}
        return dict(self._camera)

    @property
    def camera(self) -> dict[str, float]:
        with self._lock:
            return dict(self._camera)

    @serialized
    def delete_source(self, source_id: str) -> None:
        node = self._node(source_id)
        children = [s["id"] for s in self._sources.values() if s["parent_id"] == source_id]
        if children:
            names = ", ".join(f"{self._sources[c]['name']} ({c})" for c in children)
            raise EngineError(f"cannot delete {node['name']!r}: dependent sources {names}")
        del self._sources[source_id]
        self._fields.pop(source_id, None)
        self._tfs.pop(source_id, None)

    @serialized
    def set_visibility(self, source_id: str, visible: bool) -> PipelineSource:
        self._node(source_id)["visible"] = bool(visible)
        return self._freeze(source_id)
