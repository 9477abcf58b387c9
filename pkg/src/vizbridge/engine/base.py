"""Engine contract shared by the mock and ParaView backends."""

from __future__ import annotations

import abc
import functools
import math
import threading
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

SOURCE_KINDS = ("reader", "contour", "volume_repr")


class EngineError(Exception):
    """Raised for any failed engine operation; the message is agent-facing."""


class ApplicabilityError(EngineError):
    """The operation cannot be applied to the given source kind."""


class TransferFunctionError(EngineError):
    """A transfer function violates its invariants."""

    def __init__(self, message: str, index: int | None = None, which: str | None = None):
        super().__init__(message)
        self.index = index
        self.which = which


@dataclass(frozen=True)
class PipelineSource:
    id: str
    name: str
    kind: str
    params: dict[str, Any] = field(default_factory=dict)
    parent_id: str | None = None
    visible: bool = True

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "name": self.name,
            "kind": self.kind,
            "params": dict(self.params),
            "parent_id": self.parent_id,
            "visible": self.visible,
        }


def _finite(x: Any) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise TypeError(f"expected a number, got {x!r}")
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"expected a finite number, got {x!r}")
    return x


@dataclass(frozen=True)
class TransferFunction:
    """Piecewise-linear color and opacity maps over scalar values.

    ``color_points`` holds ``(scalar, r, g, b)`` tuples and ``opacity_points``
    holds ``(scalar, alpha)`` tuples; both sorted by strictly increasing scalar.
    """

    color_points: tuple[tuple[float, float, float, float], ...]
    opacity_points: tuple[tuple[float, float], ...]

    def __post_init__(self):
        object.__setattr__(self, "color_points", _check_points(self.color_points, 4, "color"))
        object.__setattr__(self, "opacity_points", _check_points(self.opacity_points, 2, "opacity"))

    @classmethod
    def ramp(cls, lo: float, hi: float) -> "TransferFunction":
        """Blue to red over ``[lo, hi]`` with opacity rising linearly 0 to 1."""
        return cls(
            color_points=((lo, 0.0, 0.0, 1.0), (hi, 1.0, 0.0, 0.0)),
            opacity_points=((lo, 0.0), (hi, 1.0)),
        )

    def color(self, s: float) -> tuple[float, float, float]:
        xs = [p[0] for p in self.color_points]
        return tuple(_interp(s, xs, [p[c] for p in self.color_points]) for c in (1, 2, 3))

    def opacity(self, s: float) -> float:
        xs = [p[0] for p in self.opacity_points]
        return _interp(s, xs, [p[1] for p in self.opacity_points])

    def with_color_points(self, points: Iterable[Sequence[float]]) -> "TransferFunction":
        return TransferFunction(tuple(tuple(p) for p in points), self.opacity_points)

    def with_opacity_points(self, points: Iterable[Sequence[float]]) -> "TransferFunction":
        return TransferFunction(self.color_points, tuple(tuple(p) for p in points))

    def to_dict(self) -> dict[str, list[list[float]]]:
        return {
            "color_points": [list(p) for p in self.color_points],
            "opacity_points": [list(p) for p in self.opacity_points],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "TransferFunction":
        try:
            return cls(
                tuple(tuple(p) for p in data["color_points"]),
                tuple(tuple(p) for p in data["opacity_points"]),
            )
        except (KeyError, TypeError) as exc:
            raise TransferFunctionError(f"malformed transfer function: {exc}") from None


def _interp(s: float, xs: Sequence[float], ys: Sequence[float]) -> float:
    # clamp outside the control points, linear in between
    if s <= xs[0]:
        return float(ys[0])
    if s >= xs[-1]:
        return float(ys[-1])
    for i in range(1, len(xs)):
        if s <= xs[i]:
            t = (s - xs[i - 1]) / (xs[i] - xs[i - 1])
            return float(ys[i - 1] + t * (ys[i] - ys[i - 1]))
    return float(ys[-1])  # pragma: no cover


def _check_points(points: Any, width: int, which: str) -> tuple:
    try:
        points = list(points)
    except TypeError:
        raise TransferFunctionError(f"{which} points must be a list", which=which) from None
    if len(points) < 2:
        raise TransferFunctionError(
            f"{which} map needs at least two points, got {len(points)}", which=which
        )
    out = []
    prev = None
    for i, p in enumerate(points):
        try:
            p = tuple(_finite(v) for v in p)
        except (TypeError, ValueError) as exc:
            raise TransferFunctionError(f"{which} point {i}: {exc}", i, which) from None
        if len(p) != width:
            raise TransferFunctionError(
                f"{which} point {i}: expected {width} numbers, got {len(p)}", i, which
            )
        for v in p[1:]:
            if not 0.0 <= v <= 1.0:
                raise TransferFunctionError(
                    f"{which} point {i}: component {v} outside [0, 1]", i, which
                )
        if prev is not None and p[0] <= prev:
            raise TransferFunctionError(
                f"{which} point {i}: scalar {p[0]} must be greater than previous {prev}",
                i,
                which,
            )
        prev = p[0]
        out.append(p)
    return tuple(out)


@dataclass(frozen=True)
class RenderCapture:
    width: int
    height: int
    png: bytes
    # (scalar_lo, scalar_hi, mean_r, mean_g, mean_b, mean_alpha) per band
    band_report: tuple[tuple[float, float, float, float, float, float], ...] | None = None

    def band_report_dicts(self) -> list[dict[str, float]] | None:
        if self.band_report is None:
            return None
        keys = ("scalar_lo", "scalar_hi", "mean_r", "mean_g", "mean_b", "mean_alpha")
        return [dict(zip(keys, row)) for row in self.band_report]


def serialized(method):
    """Run an engine method under the instance's command lock."""

    @functools.wraps(method)
    def wrapper(self, *args, **kwargs):
        with self._lock:
            return method(self, *args, **kwargs)

    return wrapper


class Engine(abc.ABC):
    """Visualization pipeline engine.

    Every public operation is serialized through ``self._lock`` so a second
    client (a GUI user on a shared server, or a test thread) can mutate the
    same session without tearing state.
    """

    name = "engine"

    def __init__(self):
        self._lock = threading.RLock()

    @abc.abstractmethod
    def load_dataset(self, spec: Any) -> PipelineSource: ...

    @abc.abstractmethod
    def list_sources(self, kind: str | None = None, name: str | None = None) -> list[PipelineSource]: ...

    @abc.abstractmethod
    def get_source(self, source_id: str) -> PipelineSource: ...

    @abc.abstractmethod
    def create_contour(self, parent_id: str, value: float) -> PipelineSource: ...

    @abc.abstractmethod
    def set_contour_value(self, source_id: str, value: float) -> PipelineSource: ...

    @abc.abstractmethod
    def surface_area(self, source_id: str) -> float: ...

    @abc.abstractmethod
    def area_domain(self, source_id: str) -> tuple[float, float]:
        """Isovalue interval on which ``surface_area`` is defined."""

    @abc.abstractmethod
    def scalar_range(self, source_id: str) -> tuple[float, float]: ...

    @abc.abstractmethod
    def histogram(self, source_id: str, bins: int) -> list[tuple[float, float, int]]: ...

    @abc.abstractmethod
    def enable_volume_rendering(self, source_id: str) -> PipelineSource: ...

    @abc.abstractmethod
    def get_transfer_function(self, source_id: str) -> TransferFunction: ...

    @abc.abstractmethod
    def set_transfer_function(self, source_id: str, tf: TransferFunction) -> None: ...

    @abc.abstractmethod
    def render(self) -> RenderCapture: ...

    @abc.abstractmethod
    def reset_camera(self) -> dict[str, float]: ...

    @abc.abstractmethod
    def orbit(self, azimuth_deg: float, elevation_deg: float) -> dict[str, float]: ...

    @abc.abstractmethod
    def delete_source(self, source_id: str) -> None: ...

    @abc.abstractmethod
    def set_visibility(self, source_id: str, visible: bool) -> PipelineSource: ...

    def reader_of(self, source_id: str) -> PipelineSource:
        """Walk parent links up to the reader that feeds ``source_id``."""
        with self._lock:
            src = self.get_source(source_id)
            while src.parent_id is not None:
                src = self.get_source(src.parent_id)
            return src

    def measure_contour(self, source_id: str) -> tuple[float, float]:
        """(isovalue, area) read together, so a concurrent edit cannot split them."""
        with self._lock:
            return self.get_source(source_id).params["value"], self.surface_area(source_id)

    def snapshot(self) -> dict[str, Any]:
        """Comparable description of the pipeline: sources plus transfer functions."""
        with self._lock:
            sources = [s.to_dict() for s in self.list_sources()]
            tfs = {
                s["id"]: self.get_transfer_function(s["id"]).to_dict()
                for s in sources
                if s["kind"] == "volume_repr"
            }
            return {"sources": sources, "transfer_functions": tfs}
