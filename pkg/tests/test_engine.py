import io
import itertools
import json
import math
import threading

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image
from skimage.measure import marching_cubes, mesh_surface_area

from vizbridge.engine import (
    ApplicabilityError,
    EngineError,
    FieldSpec,
    MockEngine,
    TransferFunction,
    TransferFunctionError,
)
from vizbridge.engine.mock import LATTICE_N

from .conftest import LINEAR, RADIAL


def _corner_max(center):
    # brute force over the eight cube corners
    return max(math.dist(center, c) for c in itertools.product((0, 1), repeat=3))


def _mc_area(field, v, n=96):
    ticks = (np.arange(n) + 0.5) / n
    grid = np.stack(np.meshgrid(ticks, ticks, ticks, indexing="ij"), axis=-1)
    verts, faces, _, _ = marching_cubes(field.values(grid), v, spacing=(1 / n,) * 3)
    return mesh_surface_area(verts, faces)


@pytest.fixture
def radial(engine):
    return engine.load_dataset(RADIAL)


@pytest.fixture
def volume(engine, radial):
    return engine.enable_volume_rendering(radial.id)


class TestLoad:
    def test_radial_range(self, engine, radial):
        lo, hi = engine.scalar_range(radial.id)
        assert lo == 0.0
        assert hi == pytest.approx(_corner_max((0.5, 0.5, 0.5)), rel=1e-12)
        assert hi == pytest.approx(0.8660254, abs=1e-7)

    def test_off_center_radial_range(self, engine):
        src = engine.load_dataset({"family": "radial", "center": [0.2, 0.3, 0.9]})
        assert engine.scalar_range(src.id)[1] == pytest.approx(_corner_max((0.2, 0.3, 0.9)))

    def test_linear_range(self, engine):
        src = engine.load_dataset(LINEAR)
        assert engine.scalar_range(src.id) == (0.0, 1.0)
        assert src.kind == "reader"

    def test_missing_file(self, engine):
        with pytest.raises(EngineError, match="cannot read dataset"):
            engine.load_dataset("missing.vti")

    def test_field_file(self, engine, tmp_path):
        path = tmp_path / "ball.json"
        path.write_text(json.dumps({"family": "shells", "shell_period": 0.2}))
        src = engine.load_dataset(str(path))
        assert src.name == "ball-1"
        assert engine.scalar_range(src.id) == (0.0, 0.2)

    @pytest.mark.parametrize("bad", [{"family": "torus"}, {"family": "radial", "center": [2, 0, 0]},
                                     {"family": "shells", "shell_period": -1}, {"nope": 1}, 42])
    def test_invalid_spec(self, engine, bad):
        with pytest.raises(EngineError):
            engine.load_dataset(bad)


class TestSources:
    def test_list_empty(self, engine):
        assert engine.list_sources() == []

    def test_filters(self, engine, radial):
        c = engine.create_contour(radial.id, 0.4)
        assert engine.list_sources(kind="contour") == [c]
        assert [s.name for s in engine.list_sources(name="iso")] == ["isosurface-1"]
        assert [s.id for s in engine.list_sources()] == [radial.id, c.id]

    def test_contour_out_of_range(self, engine, radial):
        with pytest.raises(EngineError, match=r"\[0, 0\.866\]"):
            engine.create_contour(radial.id, 2.0)
        with pytest.raises(EngineError):
            engine.create_contour(radial.id, 0.0)  # range bound is excluded

    def test_contour_of_contour(self, engine, radial):
        c = engine.create_contour(radial.id, 0.4)
        with pytest.raises(ApplicabilityError):
            engine.create_contour(c.id, 0.2)

    def test_set_value_then_area(self, engine, radial):
        c = engine.create_contour(radial.id, 0.4)
        engine.set_contour_value(c.id, 0.2)
        assert engine.surface_area(c.id) == pytest.approx(4 * math.pi * 0.04, rel=1e-12)

    def test_set_same_value_is_idempotent(self, engine, radial):
        c = engine.create_contour(radial.id, 0.4)
        before = engine.snapshot()
        engine.set_contour_value(c.id, 0.4)
        assert engine.snapshot() == before

    def test_set_value_on_reader(self, engine, radial):
        with pytest.raises(ApplicabilityError):
            engine.set_contour_value(radial.id, 0.2)

    def test_delete(self, engine, radial):
        c = engine.create_contour(radial.id, 0.4)
        with pytest.raises(EngineError, match=c.id):
            engine.delete_source(radial.id)
        engine.delete_source(c.id)
        assert engine.list_sources() == [radial]
        c2 = engine.create_contour(radial.id, 0.3)
        assert c2.id != c.id  # ids are never reused

    def test_unknown_id(self, engine):
        with pytest.raises(EngineError, match="unknown source"):
            engine.delete_source("src-99")

    def test_hidden_pipeline_renders_nothing(self, engine, radial):
        engine.set_visibility(radial.id, False)
        with pytest.raises(EngineError, match="nothing to render"):
            engine.render()

    def test_empty_render(self, engine):
        with pytest.raises(EngineError, match="nothing to render"):
            engine.render()


class TestArea:
    def test_sphere_matches_marching_cubes(self, engine, radial):
        c = engine.create_contour(radial.id, 0.4)
        area = engine.surface_area(c.id)
        assert area == pytest.approx(2.0106, abs=1e-4)
        assert area == pytest.approx(_mc_area(FieldSpec("radial"), 0.4), rel=5e-3)

    def test_linear_plane(self, engine):
        src = engine.load_dataset(LINEAR)
        c = engine.create_contour(src.id, 0.7)
        assert engine.surface_area(c.id) == 1.0
        assert _mc_area(FieldSpec("linear_x"), 0.7) == pytest.approx(1.0, rel=0.03)

    def test_clipped_regime(self, engine, radial):
        c = engine.create_contour(radial.id, 0.6)
        with pytest.raises(EngineError, match="clipped regime"):
            engine.surface_area(c.id)

    def test_area_on_reader(self, engine, radial):
        with pytest.raises(ApplicabilityError):
            engine.surface_area(radial.id)

    def test_shells_sum_whole_shells(self, engine):
        src = engine.load_dataset({"family": "shells", "shell_period": 0.25})
        c = engine.create_contour(src.id, 0.1)
        # radii 0.1 and 0.35 fit; 0.6 is clipped by the cube
        assert engine.surface_area(c.id) == pytest.approx(4 * math.pi * (0.1**2 + 0.35**2))

    def test_area_domain(self, engine, radial):
        assert engine.area_domain(radial.id) == (0.0, 0.5)
        off = engine.load_dataset({"family": "radial", "center": [0.3, 0.5, 0.5]})
        assert engine.area_domain(off.id) == pytest.approx((0.0, 0.3))

    @settings(max_examples=200, deadline=None)
    @given(st.floats(min_value=1e-6, max_value=0.5))
    def test_sphere_formula(self, v):
        eng = MockEngine()
        r = eng.load_dataset(RADIAL)
        c = eng.create_contour(r.id, v)
        assert math.isclose(eng.surface_area(c.id), 4 * math.pi * v * v, rel_tol=1e-12)

    @given(st.floats(min_value=1e-6, max_value=0.5), st.floats(min_value=1e-6, max_value=0.5))
    def test_monotone(self, a, b):
        f = FieldSpec("radial")
        if a < b:
            assert f.area(a) < f.area(b)


class TestHistogram:
    def test_linear_quartiles(self, engine):
        src = engine.load_dataset(LINEAR)
        # brute-force count: x-index i lands in quartile floor(4 x); each x slab holds N^2 samples
        expected = [0] * 4
        for i in range(LATTICE_N):
            expected[int(4 * (i + 0.5) / LATTICE_N)] += LATTICE_N**2
        got = engine.histogram(src.id, 4)
        assert [c for _, _, c in got] == expected == [65536] * 4
        assert [(lo, hi) for lo, hi, _ in got] == [(0, 0.25), (0.25, 0.5), (0.5, 0.75), (0.75, 1.0)]

    def test_radial_brute_force(self, engine, radial):
        lo, hi = engine.scalar_range(radial.id)
        bins = 7
        expected = [0] * bins
        ticks = [(i + 0.5) / LATTICE_N for i in range(LATTICE_N)]
        for x in ticks:
            for y in ticks:
                for z in ticks:
                    d = math.sqrt((x - 0.5) ** 2 + (y - 0.5) ** 2 + (z - 0.5) ** 2)
                    expected[min(bins - 1, int((d - lo) / (hi - lo) * bins))] += 1
        assert [c for _, _, c in engine.histogram(radial.id, bins)] == expected

    def test_single_bin(self, engine, radial):
        assert engine.histogram(radial.id, 1) == [(0.0, pytest.approx(0.8660254), LATTICE_N**3)]

    @pytest.mark.parametrize("bins", [0, -3, 2.5, True])
    def test_bad_bins(self, engine, radial, bins):
        with pytest.raises(EngineError):
            engine.histogram(radial.id, bins)

    def test_contour_uses_reader(self, engine, radial):
        c = engine.create_contour(radial.id, 0.4)
        assert engine.histogram(c.id, 5) == engine.histogram(radial.id, 5)


class TestVolume:
    def test_default_tf(self, engine, radial, volume):
        tf = engine.get_transfer_function(volume.id)
        assert tf.color_points[0] == (0.0, 0.0, 0.0, 1.0)
        assert tf.color_points[-1][0] == pytest.approx(0.8660254)
        assert tf.color_points[-1][1:] == (1.0, 0.0, 0.0)
        assert tf.opacity_points == ((0.0, 0.0), (tf.color_points[-1][0], 1.0))

    def test_one_per_reader(self, engine, radial, volume):
        with pytest.raises(EngineError, match="already exists"):
            engine.enable_volume_rendering(radial.id)

    def test_on_contour(self, engine, radial):
        c = engine.create_contour(radial.id, 0.4)
        with pytest.raises(ApplicabilityError):
            engine.enable_volume_rendering(c.id)

    def test_gray_ramp_bands(self, engine, radial, volume):
        hi = engine.scalar_range(radial.id)[1]
        tf = TransferFunction(((0.0, 0, 0, 0), (hi, 1, 1, 1)), ((0.0, 1.0), (hi, 1.0)))
        engine.set_transfer_function(volume.id, tf)
        report = engine.render().band_report
        means = [row[2] for row in report]
        for row in report:
            mid = 0.5 * (row[0] + row[1])
            assert row[2] == row[3] == row[4] == pytest.approx(mid / hi)
        assert means == sorted(means) and len(set(means)) == 8

    def test_red_compositing(self, engine, radial, volume):
        hi = engine.scalar_range(radial.id)[1]
        tf = TransferFunction(((0.0, 1, 0, 0), (hi, 1, 0, 0)), ((0.0, 0.7), (hi, 0.7)))
        engine.set_transfer_function(volume.id, tf)
        for row in engine.render().band_report:
            assert row[2:] == pytest.approx((0.7, 0.0, 0.0, 0.7))

    def test_bands_partition_range(self, engine, radial, volume):
        report = engine.render().band_report
        assert report[0][0] == 0.0 and report[-1][1] == pytest.approx(0.8660254)
        assert all(a[1] == b[0] for a, b in zip(report, report[1:]))

    def test_png_pixels_match_report(self, engine, radial, volume):
        cap = engine.render()
        im = Image.open(io.BytesIO(cap.png))
        assert im.size == (cap.width, cap.height)
        px = np.asarray(im)
        rows = cap.height // 8
        for i, row in enumerate(cap.band_report):
            y = cap.height - i * rows - 1
            assert tuple(px[y, 0]) == tuple(round(c * 255) for c in row[2:5])

    @pytest.mark.parametrize(
        "points, match",
        [
            (((0.0, 1.5, 0, 0), (0.5, 0, 0, 0)), "component 1.5"),
            (((0.0, 0, 0, 0),), "at least two"),
            (((0.5, 0, 0, 0), (0.2, 0, 0, 0)), "color point 1"),
            (((0.0, 0, 0), (0.5, 0, 0, 0)), "color point 0"),
        ],
    )
    def test_invalid_tf(self, points, match):
        with pytest.raises(TransferFunctionError, match=match):
            TransferFunction(points, ((0, 0), (1, 1)))

    def test_tf_outside_range(self, engine, radial, volume):
        tf = TransferFunction(((0.0, 0, 0, 0), (1.5, 1, 1, 1)), ((0.0, 1.0), (0.5, 1.0)))
        with pytest.raises(TransferFunctionError, match="color point 1"):
            engine.set_transfer_function(volume.id, tf)

    def test_tf_slack(self, engine, radial, volume):
        tf = TransferFunction(((0.0, 0, 0, 0), (0.87, 1, 1, 1)), ((0.0, 1.0), (0.87, 1.0)))
        engine.set_transfer_function(volume.id, tf)
        assert engine.get_transfer_function(volume.id) == tf


class TestCameraAndDeterminism:
    def test_reset(self, engine):
        engine.orbit(30, 10)
        engine.reset_camera()
        assert engine.camera == {"azimuth": 0.0, "elevation": 0.0}

    def test_full_turn(self, engine):
        assert engine.orbit(360, 0)["azimuth"] == 0.0

    def test_additive(self, engine):
        engine.orbit(10, 0)
        assert engine.orbit(10, 0)["azimuth"] == 20.0

    def test_elevation_clamped(self, engine):
        assert engine.orbit(0, 500)["elevation"] == 90.0

    def test_render_twice_identical(self, engine, radial, volume):
        assert engine.render().png == engine.render().png

    def test_camera_visible_in_png(self, engine, radial):
        a = engine.render().png
        engine.orbit(15, 0)
        b = engine.render()
        assert a != b.png
        assert json.loads(Image.open(io.BytesIO(b.png)).text["vizbridge:camera"])["azimuth"] == 15.0

    def test_equal_state_equal_bytes(self):
        def build():
            eng = MockEngine()
            r = eng.load_dataset(RADIAL)
            eng.create_contour(r.id, 0.3)
            eng.orbit(45, -10)
            return eng.render().png

        assert build() == build()


def test_concurrent_clients_keep_forest(engine, radial):
    c = engine.create_contour(radial.id, 0.4)
    errors = []

    def gui():
        for i in range(300):
            try:
                engine.set_contour_value(c.id, 0.05 + (i % 40) / 100)
                engine.set_visibility(c.id, bool(i % 2))
            except Exception as exc:  # pragma: no cover - reported below
                errors.append(exc)

    t = threading.Thread(target=gui)
    t.start()
    for _ in range(300):
        v = engine.get_source(c.id).params["value"]
        assert 0 < v < 0.5
        engine.surface_area(c.id)
    t.join()
    assert not errors
    for s in engine.list_sources():
        assert (s.kind == "reader") == (s.parent_id is None)
