"""Engine backend driving a ParaView ``pvserver`` started in multi-client mode.

The GUI and this process attach to the same server, so both see one shared
pipeline. Requires ``paraview.simple`` on the Python path (``pvpython`` or a
ParaView-enabled environment); it is imported lazily on connect.

Surface area is measured with the IntegrateVariables filter, the usual
ParaView route for integrating a polygonal surface.
"""

from __future__ import annotations

import math
import os
import tempfile
from typing import Any

from .base import (
    ApplicabilityError,
    Engine,
    EngineError,
    PipelineSource,
    RenderCapture,
    TransferFunction,
    serialized,
)

_KIND_BY_XML = {"Contour": "contour"}


def parse_url(url: str) -> tuple[str, int]:
    host, sep, port = url.rpartition(":")
    if not sep or not host:
        raise ValueError(f"expected host:port, got {url!r}")
    try:
        return host, int(port)
    except ValueError:
        raise ValueError(f"invalid port in {url!r}") from None


class ParaViewEngine(Engine):
    name = "paraview"

    def __init__(self, url: str, width: int = 800, height: int = 600):
        super().__init__()
        self.host, self.port = parse_url(url)
        self.size = (width, height)
        try:
            from paraview import simple  # type: ignore[import-not-found]
        except ImportError as exc:
            raise EngineError(
                "the paraview backend needs paraview.simple; run under pvpython"
            ) from exc
        self._pv = simple
        self._pv.Connect(self.host, self.port)
        # proxies do not carry stable ids across clients, so keep our own map
        self._ids: dict[str, Any] = {}
        self._meta: dict[str, dict[str, Any]] = {}
        self._next_id = 1

    def _register(self, proxy, kind: str, name: str, parent_id: str | None) -> PipelineSource:
        sid = f"src-{self._next_id}"
        self._next_id += 1
        self._ids[sid] = proxy
        self._meta[sid] = {"kind": kind, "parent_id": parent_id}
        self._pv.RenameSource(name, proxy)
        return self._describe(sid)

    def _sync(self) -> None:
        # adopt sources created from the GUI on the shared server
        known = {id(p) for p in self._ids.values()}
        for (name, _), proxy in self._pv.GetSources().items():
            if id(proxy) not in known:
                kind = _KIND_BY_XML.get(proxy.GetXMLName(), "reader")
                sid = f"src-{self._next_id}"
                self._next_id += 1
                self._ids[sid] = proxy
                self._meta[sid] = {"kind": kind, "parent_id": None}
        live = {id(p) for p in self._pv.GetSources().values()}
        for sid in [s for s, p in self._ids.items() if id(p) not in live and self._meta[s]["kind"] != "volume_repr"]:
            del self._ids[sid], self._meta[sid]

    def _proxy(self, sid: str):
        self._sync()
        try:
            return self._ids[sid]
        except KeyError:
            raise EngineError(f"unknown source id {sid!r}") from None

    def _describe(self, sid: str) -> PipelineSource:
        proxy, meta = self._ids[sid], self._meta[sid]
        params: dict[str, Any] = {}
        if meta["kind"] == "contour":
            params["value"] = float(proxy.Isosurfaces[0])
        name = self._pv.GetSources() and next(
            (n for (n, _), p in self._pv.GetSources().items() if p is proxy), sid
        )
        rep = self._pv.GetDisplayProperties(proxy)
        return PipelineSource(sid, name, meta["kind"], params, meta["parent_id"], bool(rep.Visibility))

    def _array(self, sid: str) -> tuple[Any, str]:
        reader = self._proxy(self.reader_of(sid).id)
        arrays = reader.PointData.keys()
        if not arrays:
            raise EngineError("dataset has no point scalars")
        return reader, arrays[0]

    @serialized
    def load_dataset(self, spec: Any) -> PipelineSource:
        if not isinstance(spec, str) or not os.path.exists(spec):
            raise EngineError(f"cannot read dataset {spec!r}")
        proxy = self._pv.OpenDataFile(spec)
        if proxy is None:
            raise EngineError(f"cannot read dataset {spec!r}")
        self._pv.Show(proxy)
        self._pv.SetActiveSource(proxy)
        stem = os.path.splitext(os.path.basename(spec))[0]
        return self._register(proxy, "reader", f"{stem}-{self._next_id}", None)

    @serialized
    def list_sources(self, kind=None, name=None) -> list[PipelineSource]:
        self._sync()
        out = [self._describe(s) for s in self._ids]
        return [
            s for s in out
            if (kind is None or s.kind == kind) and (name is None or name.lower() in s.name.lower())
        ]

    @serialized
    def get_source(self, source_id: str) -> PipelineSource:
        self._proxy(source_id)
        return self._describe(source_id)

    def _check_value(self, sid: str, value: float) -> float:
        lo, hi = self.scalar_range(sid)
        if not (math.isfinite(value) and lo < value < hi):
            raise EngineError(f"isovalue {value:.6g} outside the scalar range [{lo:.4g}, {hi:.4g}]")
        return float(value)

    @serialized
    def create_contour(self, parent_id: str, value: float) -> PipelineSource:
        if self._meta.get(parent_id, {}).get("kind") != "reader":
            self._proxy(parent_id)
            raise ApplicabilityError("contour applies to reader sources only")
        reader, array = self._array(parent_id)
        value = self._check_value(parent_id, value)
        proxy = self._pv.Contour(Input=reader, ContourBy=["POINTS", array], Isosurfaces=[value])
        self._pv.Show(proxy)
        return self._register(proxy, "contour", f"isosurface-{self._next_id}", parent_id)

    @serialized
    def set_contour_value(self, source_id: str, value: float) -> PipelineSource:
        proxy = self._proxy(source_id)
        if self._meta[source_id]["kind"] != "contour":
            raise ApplicabilityError("set_contour_value applies to contour sources only")
        proxy.Isosurfaces = [self._check_value(source_id, value)]
        self._pv.Render()
        return self._describe(source_id)

    @serialized
    def surface_area(self, source_id: str) -> float:
        proxy = self._proxy(source_id)
        if self._meta[source_id]["kind"] != "contour":
            raise ApplicabilityError("surface_area applies to contour sources only")
        from paraview import servermanager  # type: ignore[import-not-found]

        integ = self._pv.IntegrateVariables(Input=proxy)
        try:
            data = servermanager.Fetch(integ)
            return float(data.GetCellData().GetArray("Area").GetValue(0))
        finally:
            self._pv.Delete(integ)

    @serialized
    def area_domain(self, source_id: str) -> tuple[float, float]:
        return self.scalar_range(source_id)

    @serialized
    def scalar_range(self, source_id: str) -> tuple[float, float]:
        reader, array = self._array(source_id)
        lo, hi = reader.PointData[array].GetRange()
        return float(lo), float(hi)

    @serialized
    def histogram(self, source_id: str, bins: int) -> list[tuple[float, float, int]]:
        if isinstance(bins, bool) or not isinstance(bins, int) or bins < 1:
            raise EngineError(f"bins must be a positive integer, got {bins!r}")
        from paraview import servermanager  # type: ignore[import-not-found]

        reader, array = self._array(source_id)
        hist = self._pv.Histogram(Input=reader, SelectInputArray=["POINTS", array], BinCount=bins)
        try:
            table = servermanager.Fetch(hist)
            counts = table.GetRowData().GetArray("bin_values")
            lo, hi = self.scalar_range(source_id)
            w = (hi - lo) / bins
            return [(lo + i * w, lo + (i + 1) * w, int(counts.GetValue(i))) for i in range(bins)]
        finally:
            self._pv.Delete(hist)

    @serialized
    def enable_volume_rendering(self, source_id: str) -> PipelineSource:
        reader = self._proxy(source_id)
        if self._meta[source_id]["kind"] != "reader":
            raise ApplicabilityError("volume rendering applies to reader sources only")
        if any(m["kind"] == "volume_repr" and m["parent_id"] == source_id for m in self._meta.values()):
            raise EngineError("volume representation already exists")
        _, array = self._array(source_id)
        rep = self._pv.Show(reader)
        rep.SetRepresentationType("Volume")
        self._pv.ColorBy(rep, ("POINTS", array))
        sid = f"src-{self._next_id}"
        self._next_id += 1
        self._ids[sid] = reader
        self._meta[sid] = {"kind": "volume_repr", "parent_id": source_id, "array": array}
        self.set_transfer_function(sid, TransferFunction.ramp(*self.scalar_range(source_id)))
        return PipelineSource(sid, f"volume-{sid}", "volume_repr", {}, source_id, True)

    @serialized
    def get_transfer_function(self, source_id: str) -> TransferFunction:
        meta = self._meta.get(source_id)
        if meta is None or meta["kind"] != "volume_repr":
            raise ApplicabilityError("transfer functions apply to volume representations only")
        lut = self._pv.GetColorTransferFunction(meta["array"])
        pwf = self._pv.GetOpacityTransferFunction(meta["array"])
        rgb, pts = list(lut.RGBPoints), list(pwf.Points)
        return TransferFunction(
            tuple(tuple(rgb[i : i + 4]) for i in range(0, len(rgb), 4)),
            tuple((pts[i], pts[i + 1]) for i in range(0, len(pts), 4)),
        )

    @serialized
    def set_transfer_function(self, source_id: str, tf: TransferFunction) -> None:
        meta = self._meta.get(source_id)
        if meta is None or meta["kind"] != "volume_repr":
            raise ApplicabilityError("transfer functions apply to volume representations only")
        lut = self._pv.GetColorTransferFunction(meta["array"])
        pwf = self._pv.GetOpacityTransferFunction(meta["array"])
        lut.RGBPoints = [v for p in tf.color_points for v in p]
        pwf.Points = [v for s, a in tf.opacity_points for v in (s, a, 0.5, 0.0)]
        self._pv.Render()

    @serialized
    def render(self) -> RenderCapture:
        if not any(s.visible for s in self.list_sources()):
            raise EngineError("nothing to render: no visible sources")
        from PIL import Image

        fd, path = tempfile.mkstemp(suffix=".png")
        os.close(fd)
        try:
            self._pv.SaveScreenshot(path, self._pv.GetActiveViewOrCreate("RenderView"), ImageResolution=list(self.size))
            with open(path, "rb") as fh:
                png = fh.read()
            with Image.open(path) as im:
                w, h = im.size
        finally:
            os.unlink(path)
        return RenderCapture(w, h, png, None)

    def _camera_state(self) -> dict[str, float]:
        cam = self._pv.GetActiveCamera()
        return {"position": list(cam.GetPosition()), "focal_point": list(cam.GetFocalPoint())}

    @serialized
    def reset_camera(self) -> dict[str, float]:
        self._pv.ResetCamera()
        self._pv.Render()
        return self._camera_state()

    @serialized
    def orbit(self, azimuth_deg: float, elevation_deg: float) -> dict[str, float]:
        cam = self._pv.GetActiveCamera()
        cam.Azimuth(azimuth_deg)
        cam.Elevation(elevation_deg)
        self._pv.Render()
        return self._camera_state()

    @serialized
    def delete_source(self, source_id: str) -> None:
        proxy = self._proxy(source_id)
        children = [s for s, m in self._meta.items() if m["parent_id"] == source_id]
        if children:
            raise EngineError(f"cannot delete {source_id!r}: dependent sources {', '.join(children)}")
        if self._meta[source_id]["kind"] == "volume_repr":
            self._pv.GetDisplayProperties(proxy).SetRepresentationType("Outline")
        else:
            self._pv.Delete(proxy)
        del self._ids[source_id], self._meta[source_id]

    @serialized
    def set_visibility(self, source_id: str, visible: bool) -> PipelineSource:
        proxy = self._proxy(source_id)
        (self._pv.Show if visible else self._pv.Hide)(proxy)
        self._pv.Render()
        return self._describe(source_id)
