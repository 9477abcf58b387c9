import base64
import json
import math
import os
import random

import jsonschema
import pytest

from vizbridge.engine import MockEngine
from vizbridge.registry import CURATED, ToolDescriptor, ToolResult, Session

from .conftest import LINEAR, RADIAL


def payload(result: ToolResult):
    assert not result.is_error, result.text_content()
    return result.payload


def fenced(result: ToolResult):
    text = result.text_content()
    return json.loads(text.split("```json\n", 1)[1].split("\n```", 1)[0])


class TestDescriptors:
    def test_curated_set(self):
        names = CURATED.names()
        assert len(names) >= 14
        assert len(set(names)) == len(names)
        for name in names:
            assert name == name.lower() and " " not in name

    def test_descriptions_nonempty(self):
        for d in CURATED.describe_tools():
            assert d.description.strip()
            for p in d.params:
                assert p.description.strip(), (d.name, p.name)

    def test_wire_round_trip(self):
        for d in CURATED.describe_tools():
            wire = d.to_wire()
            assert ToolDescriptor.from_wire(json.loads(json.dumps(wire))) == d

    def test_isosurface_value_schema(self):
        d = {d.name: d for d in CURATED.describe_tools()}["create_isosurface"]
        prop = d.input_schema()["properties"]["value"]
        assert prop["type"] == "number"
        assert "scalar range" in prop["description"]
        assert d.input_schema()["required"] == ["value"]


class TestDispatch:
    def test_unknown_tool(self, session):
        r = session.call_tool("no_such_tool", {})
        assert r.is_error and "unknown tool" in r.text_content()

    def test_schema_violation_names_param(self, session):
        r = session.call_tool("create_isosurface", {"value": "abc"})
        assert r.is_error and "`value`" in r.text_content()

    @pytest.mark.parametrize(
        "name, args, fragment",
        [
            ("create_isosurface", {}, "missing required argument `value`"),
            ("create_isosurface", {"value": 0.1, "extra": 1}, "unexpected"),
            ("get_histogram", {"bins": 0}, "`bins`"),
            ("rotate_camera", {"azimuth": float("inf")}, "`azimuth`"),
            ("set_color_map", {"points": [[0, 1.5, 0, 0], [1, 0, 0, 0]]}, "`points[0][1]`"),
            ("load_data", {"dataset": {"family": "torus"}}, "`dataset`"),
        ],
    )
    def test_validation_messages(self, session, name, args, fragment):
        r = session.call_tool(name, args)
        assert r.is_error
        assert fragment in r.text_content()

    def test_non_dict_arguments(self, session):
        r = session.call_tool("list_sources", ["x"])
        assert r.is_error and "must be an object" in r.text_content()

    def test_every_call_logged(self, session):
        session.call_tool("list_sources")
        session.call_tool("no_such_tool", {})
        session.call_tool("create_isosurface", {"value": "x"})
        assert [e["tool"] for e in session.session_log] == ["list_sources", "no_such_tool", "create_isosurface"]
        assert [e["is_error"] for e in session.session_log] == [False, True, True]
        with open(session.log_path) as fh:
            assert [json.loads(line)["tool"] for line in fh] == ["list_sources", "no_such_tool", "create_isosurface"]

    def test_internal_failure_is_contained(self, session, monkeypatch):
        def boom(*a, **k):
            raise RuntimeError("kaboom")

        monkeypatch.setattr(session.engine, "list_sources", boom)
        r = session.call_tool("list_sources")
        assert r.is_error and "kaboom" in r.text_content()


class TestSourceTools:
    def test_empty_listing(self, session):
        r = session.call_tool("list_sources")
        assert r.text_content().startswith("no sources loaded")

    def test_load(self, session):
        r = session.call_tool("load_data", {"dataset": RADIAL})
        assert "loaded reader 'radial-1'" in r.text_content()
        assert "scalar range [0, 0.866]" in r.text_content()
        assert payload(r)["range"][1] == pytest.approx(math.sqrt(3) / 2)
        assert session.active().name == "radial-1"

    def test_bad_path(self, session):
        assert session.call_tool("load_data", {"dataset": "missing.vti"}).is_error

    def test_second_load_becomes_active(self, session):
        session.call_tool("load_data", {"dataset": RADIAL})
        session.call_tool("load_data", {"dataset": LINEAR})
        listing = payload(session.call_tool("list_sources"))
        assert [s["name"] for s in listing["sources"]] == ["radial-1", "linear_x-1"]
        assert session.active().name == "linear_x-1"
        assert "* linear_x-1" in session.call_tool("list_sources").text_content()

    def test_active_selection(self, session):
        assert session.call_tool("get_active_source").text_content().startswith("no active source")
        session.call_tool("load_data", {"dataset": RADIAL})
        session.call_tool("create_isosurface", {"value": 0.4})
        session.call_tool("set_active_source", {"name_or_id": "radial-1"})
        session.call_tool("set_active_source", {"name_or_id": "iso"})
        assert session.active().name == "isosurface-1"
        r = session.call_tool("set_active_source", {"name_or_id": "r"})
        assert r.is_error and "radial-1" in r.text_content() and "isosurface-1" in r.text_content()
        assert session.call_tool("set_active_source", {"name_or_id": "nothing"}).is_error

    def test_resolution_precedence(self, session):
        session.call_tool("load_data", {"dataset": RADIAL})
        session.call_tool("load_data", {"dataset": RADIAL})
        # exact name beats substring; exact id beats everything
        assert session.resolve("radial-1").name == "radial-1"
        assert session.resolve("src-2").name == "radial-2"
        assert session.resolve("RADIAL-2").name == "radial-2"

    def test_delete_active(self, session):
        session.call_tool("load_data", {"dataset": RADIAL})
        session.call_tool("create_isosurface", {"value": 0.4})
        r = session.call_tool("delete_source", {"name_or_id": "isosurface-1"})
        assert "active source cleared" in r.text_content()
        assert session.active() is None
        r = session.call_tool("delete_source", {"name_or_id": "radial-1"})
        assert not r.is_error and "active source cleared" not in r.text_content()

    def test_delete_with_children(self, session):
        session.call_tool("load_data", {"dataset": RADIAL})
        session.call_tool("create_isosurface", {"value": 0.4})
        r = session.call_tool("delete_source", {"name_or_id": "radial-1"})
        assert r.is_error and "isosurface-1" in r.text_content()

    def test_gui_delete_clears_active(self, session):
        session.call_tool("load_data", {"dataset": RADIAL})
        src = session.active()
        session.engine.delete_source(src.id)
        assert session.call_tool("get_active_source").text_content().startswith("no active source")


class TestIsosurfaceTools:
    @pytest.fixture
    def loaded(self, session):
        session.call_tool("load_data", {"dataset": RADIAL})
        return session

    def test_create_reports_area(self, loaded):
        r = loaded.call_tool("create_isosurface", {"value": 0.4})
        assert payload(r)["area"] == pytest.approx(2.0106, abs=1e-4)
        assert fenced(r) == r.payload
        assert loaded.active().kind == "contour"

    def test_create_on_contour(self, loaded):
        loaded.call_tool("create_isosurface", {"value": 0.4})
        r = loaded.call_tool("create_isosurface", {"value": 0.2})
        assert r.is_error and "reader" in r.text_content()

    def test_update_then_area(self, loaded):
        loaded.call_tool("create_isosurface", {"value": 0.4})
        loaded.call_tool("update_isosurface", {"value": 0.2})
        area = payload(loaded.call_tool("get_surface_area"))["area"]
        assert area == pytest.approx(0.5027, abs=1e-4)

    def test_range_error_verbatim(self, loaded):
        r = loaded.call_tool("create_isosurface", {"value": 2.0})
        assert r.is_error and "[0, 0.866]" in r.text_content()

    def test_update_needs_contour(self, loaded):
        assert loaded.call_tool("update_isosurface", {"value": 0.2}).is_error
        assert loaded.call_tool("get_surface_area").is_error

    def test_range_and_histogram(self, loaded):
        r = payload(loaded.call_tool("get_scalar_range"))
        assert r["range"] == [0.0, pytest.approx(0.8660254)]
        assert r["area_domain"] == [0.0, 0.5]
        h = payload(loaded.call_tool("get_histogram", {"bins": 1}))
        assert h["total"] == 64**3 and h["bins"][0]["count"] == 64**3

    def test_no_active_source(self, session):
        r = session.call_tool("get_scalar_range")
        assert r.is_error and "no active source" in r.text_content()
        assert session.call_tool("get_histogram", {"bins": 4}).is_error


class TestVolumeTools:
    @pytest.fixture
    def vol(self, session):
        session.call_tool("load_data", {"dataset": RADIAL})
        payload(session.call_tool("toggle_volume_rendering"))
        return session

    def test_toggle_twice_hides(self, vol):
        r = payload(vol.call_tool("toggle_volume_rendering"))
        assert r["source"]["visible"] is False

    def test_toggle_on_contour(self, vol):
        vol.call_tool("create_isosurface", {"value": 0.3})
        r = vol.call_tool("toggle_volume_rendering")
        assert r.is_error and "reader" in r.text_content()

    def test_color_map_brown_green(self, vol):
        r = vol.call_tool("set_color_map", {"points": [[0, 0.55, 0.27, 0.07], [0.87, 0.0, 0.8, 0.0]]})
        assert not r.is_error
        bands = payload(vol.call_tool("take_screenshot"))["band_report"]
        low, high = bands[0], bands[-1]
        # un-composite and compare to the ramp evaluated at each stripe midpoint
        for band in (low, high):
            mid = 0.5 * (band["scalar_lo"] + band["scalar_hi"])
            t = mid / 0.87
            want = [0.55 + t * (0.0 - 0.55), 0.27 + t * (0.8 - 0.27), 0.07 + t * (0.0 - 0.07)]
            got = [band[k] / band["mean_alpha"] for k in ("mean_r", "mean_g", "mean_b")]
            assert got == pytest.approx(want)
        assert low["mean_r"] / low["mean_alpha"] > low["mean_g"] / low["mean_alpha"]  # brownish
        assert high["mean_g"] > high["mean_r"]  # greenish

    def test_color_map_descending(self, vol):
        r = vol.call_tool("set_color_map", {"points": [[0.5, 0, 0, 0], [0.2, 1, 1, 1]]})
        assert r.is_error and "index 1" in r.text_content()

    def test_opacity_only_replaces_opacity(self, vol):
        before = payload(vol.call_tool("get_transfer_function"))["transfer_function"]
        after = payload(vol.call_tool("set_opacity_map", {"points": [[0, 1], [0.8, 0.5]]}))["transfer_function"]
        assert after["color_points"] == before["color_points"]
        assert after["opacity_points"] == [[0, 1], [0.8, 0.5]]

    def test_set_map_without_volume(self, session):
        session.call_tool("load_data", {"dataset": RADIAL})
        r = session.call_tool("set_color_map", {"points": [[0, 0, 0, 0], [0.5, 1, 1, 1]]})
        assert r.is_error and "toggle_volume_rendering" in r.text_content()


class TestScreenshots:
    def test_content_and_files(self, session):
        session.call_tool("load_data", {"dataset": RADIAL})
        session.call_tool("toggle_volume_rendering")
        r1 = session.call_tool("take_screenshot")
        r2 = session.call_tool("take_screenshot")
        images = [c for c in r1.content if c["type"] == "image"]
        texts = [c for c in r1.content if c["type"] == "text"]
        assert len(images) == 1 and len(texts) == 1
        assert images[0]["mimeType"] == "image/png"
        png = base64.b64decode(images[0]["data"])
        assert png.startswith(b"\x89PNG")
        files = sorted(f for f in os.listdir(session.screenshot_dir) if f.endswith(".png"))
        assert files == ["shot-0001.png", "shot-0002.png"]
        with open(r1.payload["path"], "rb") as fh:
            assert fh.read() == png
        assert r2.payload["path"].endswith("shot-0002.png")
        assert "band colors" in texts[0]["text"]

    def test_empty(self, session):
        r = session.call_tool("take_screenshot")
        assert r.is_error and "nothing to render" in r.text_content()


class TestCameraTools:
    def test_rotate_reset(self, session):
        assert payload(session.call_tool("rotate_camera", {"azimuth": 10}))["camera"]["azimuth"] == 10
        assert payload(session.call_tool("rotate_camera", {"azimuth": 350}))["camera"]["azimuth"] == 0
        assert payload(session.call_tool("reset_camera"))["camera"] == {"azimuth": 0.0, "elevation": 0.0}


def _random_value(rng):
    return rng.choice([
        None, True, False, 0, -1, 3, 0.5, 1e308, -2.5, "", "abc", "radial-1",
        [], [1, 2], [[0, 0, 0, 0], [1, 1, 1, 1]], [[0, 1.5, 0, 0], [1, 0, 0, 0]],
        {}, {"family": "radial"}, {"family": "x"},
    ])


def test_descriptor_constraints_equal_call_time_validation(session):
    """Fuzz arguments: the published schema accepts exactly what the tool accepts."""
    rng = random.Random(7)
    wire = {d["name"]: d["inputSchema"] for d in (t.to_wire() for t in CURATED.describe_tools())}
    validation_markers = ("invalid argument", "missing required argument", "unexpected argument", "must be an object")
    for _ in range(3000):
        name = rng.choice(list(wire))
        props = list(wire[name]["properties"]) + ["bogus"]
        args = {p: _random_value(rng) for p in rng.sample(props, rng.randint(0, len(props)))}
        schema_ok = jsonschema.Draft202012Validator(wire[name]).is_valid(args)
        fresh = Session(MockEngine())
        r = fresh.call_tool(name, args)
        rejected = r.is_error and any(m in r.text_content() for m in validation_markers)
        assert schema_ok != rejected, (name, args, r.text_content())


def test_shared_session_visibility(session):
    session.call_tool("load_data", {"dataset": RADIAL})
    session.call_tool("create_isosurface", {"value": 0.4})
    cid = session.active().id
    session.engine.set_contour_value(cid, 0.25)  # a GUI user on the shared server
    assert payload(session.call_tool("get_surface_area"))["area"] == pytest.approx(4 * math.pi * 0.0625)
    session.engine.load_dataset(LINEAR)
    assert "linear_x-1" in session.call_tool("list_sources").text_content()
