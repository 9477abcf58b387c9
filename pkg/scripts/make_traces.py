"""Regenerate the bundled traces under src/vizbridge/traces/."""

import math
import os
import tempfile

from vizbridge.cli import run_iso_half
from vizbridge.engine import MockEngine
from vizbridge.harness import Trace, TraceStep
from vizbridge.registry import Session

OUT = os.path.join(os.path.dirname(__file__), "..", "src", "vizbridge", "traces")
RADIAL = {"family": "radial"}
OK = {"is_error": False}
ERR = {"is_error": True}


def num(path, value, rel_tol=0.01):
    return {"numeric": {"path": path, "value": value, "rel_tol": rel_tol}}


def iso_half() -> Trace:
    session = Session(MockEngine(), screenshot_dir=tempfile.mkdtemp())
    run_iso_half(session)
    steps = []
    for entry in session.session_log:
        expect = [OK]
        if entry["tool"] == "get_surface_area":
            expect.append(num("area", entry["digest"]["payload"]["area"], 1e-9))
        steps.append(TraceStep(entry["tool"], entry["arguments"], expect))
    steps[1].expect.append(num("area", 4 * math.pi * 0.16))
    # the solver ends on its converged isovalue: half the reference area
    steps.append(TraceStep("get_surface_area", {}, [OK, num("area", 0.5 * 4 * math.pi * 0.16)]))
    return Trace("iso-half", steps, comment="contour a radial field at 0.4, then search for half its area")


def tf_bands() -> Trace:
    return Trace(
        "tf-bands",
        [
            TraceStep("load_data", {"dataset": RADIAL}, [OK, {"text_contains": "scalar range [0, 0.866]"}]),
            TraceStep("toggle_volume_rendering", {}, [OK]),
            TraceStep(
                "set_color_map",
                {"points": [[0, 0.55, 0.27, 0.07], [0.87, 0.0, 0.8, 0.0]]},
                [OK],
            ),
            TraceStep("take_screenshot", {}, [OK, {"has_image": True}, num("band_report.7.mean_alpha", 0.9375)]),
        ],
        comment="brown base, green top",
    )


def shared_session() -> Trace:
    return Trace(
        "shared-session",
        [
            TraceStep("load_data", {"dataset": RADIAL}, [OK]),
            TraceStep("create_isosurface", {"value": 0.4}, [OK]),
            TraceStep("get_surface_area", {}, [OK, num("area", 4 * math.pi * 0.4**2, 1e-12)]),
            TraceStep(gui="set_contour_value", arguments={"source": "isosurface-1", "value": 0.2}),
            TraceStep("get_surface_area", {}, [OK, num("area", 4 * math.pi * 0.2**2, 1e-12)]),
            TraceStep(gui="delete_source", arguments={"source": "isosurface-1"}),
            TraceStep("get_active_source", {}, [OK, {"text_contains": "no active source"}]),
            TraceStep("list_sources", {}, [OK, {"text_contains": "radial-1"}]),
        ],
        comment="a second client edits the shared pipeline between agent calls",
    )


def error_handling() -> Trace:
    return Trace(
        "error-handling",
        [
            TraceStep("get_active_source", {}, [OK, {"text_contains": "no active source"}]),
            TraceStep("list_sources", {}, [OK, {"text_contains": "no sources loaded"}]),
            TraceStep("take_screenshot", {}, [ERR, {"text_contains": "nothing to render"}]),
            TraceStep("no_such_tool", {}, [ERR, {"text_contains": "unknown tool"}]),
            TraceStep("load_data", {"dataset": "missing.vti"}, [ERR, {"text_contains": "cannot read dataset"}]),
            TraceStep("load_data", {"dataset": RADIAL}, [OK]),
            TraceStep("create_isosurface", {"value": "abc"}, [ERR, {"text_contains": "value"}]),
            TraceStep("create_isosurface", {"value": 2.0}, [ERR, {"text_contains": "[0, 0.866]"}]),
            TraceStep("get_histogram", {"bins": 0}, [ERR, {"text_contains": "bins"}]),
            TraceStep("create_isosurface", {"value": 0.4}, [OK]),
            TraceStep("create_isosurface", {"value": 0.2}, [ERR, {"text_contains": "reader"}]),
            TraceStep("update_isosurface", {"value": 0.6}, [OK]),
            TraceStep("get_surface_area", {}, [ERR, {"text_contains": "clipped regime"}]),
            TraceStep("delete_source", {"name_or_id": "radial-1"}, [ERR, {"text_contains": "isosurface-1"}]),
            TraceStep("set_active_source", {"name_or_id": "r"}, [ERR, {"text_contains": "ambiguous"}]),
            TraceStep("delete_source", {"name_or_id": "iso"}, [OK, {"text_contains": "active source cleared"}]),
        ],
        comment="every failure comes back as an error result the agent can read",
    )


if __name__ == "__main__":
    for trace in (iso_half(), tf_bands(), shared_session(), error_handling()):
        trace.save(os.path.join(OUT, f"{trace.name}.json"))
        print("wrote", trace.name, len(trace.steps), "steps")
