import json

import cv2
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from bimsaliency.attention import ConspicuitySet
from bimsaliency.enhancer import EnhancementReport, IterationRecord, TargetColor
from bimsaliency.errors import (
    DimensionMismatch,
    InvalidDepth,
    IoError,
    MalformedCatalog,
    MissingFile,
    UnknownElementId,
)
from bimsaliency.scene_io import (
    load_bundle,
    read_pfm,
    resolve_sky_depth,
    save_bundle,
    save_bundle_outputs,
    save_plane,
    write_pfm,
)
from bimsaliency.synth import SynthObject, SynthSpec, build_scene


@pytest.fixture
def scene():
    spec = SynthSpec(width=160, height=120, vp=(80, 60), n_radial_lines=12, seed=2,
                     objects=[SynthObject(color="red", relevant=True)])
    return build_scene(spec)


@pytest.fixture
def bundle_dir(tmp_path, scene):
    save_bundle(scene.bundle, tmp_path / "bundle", raw_depth=scene.raw_depth)
    return tmp_path / "bundle"


def read_gray(path):
    return cv2.imread(str(path), cv2.IMREAD_UNCHANGED)


# -- load ----------------------------------------------------------------------------

def test_load_round_trips_the_bundle(bundle_dir, scene):
    bundle = load_bundle(bundle_dir)
    assert bundle.shape == (120, 160)
    np.testing.assert_array_equal(bundle.image, scene.bundle.image)
    np.testing.assert_array_equal(bundle.labels, scene.bundle.labels)
    np.testing.assert_array_equal(bundle.depth, scene.bundle.depth)
    assert bundle.catalog == scene.bundle.catalog


def test_load_is_deterministic(bundle_dir):
    a, b = load_bundle(bundle_dir), load_bundle(bundle_dir)
    np.testing.assert_array_equal(a.image, b.image)
    np.testing.assert_array_equal(a.depth, b.depth)
    np.testing.assert_array_equal(a.labels, b.labels)


@pytest.mark.parametrize("name", ["image.png", "depth.pfm", "labels.png", "elements.json"])
def test_missing_file(bundle_dir, name):
    (bundle_dir / name).unlink()
    with pytest.raises(MissingFile):
        load_bundle(bundle_dir)


def test_label_size_mismatch(tmp_path):
    spec = SynthSpec(width=320, height=240, vp=(160, 120), seed=0)
    save_bundle(build_scene(spec).bundle, tmp_path)
    cv2.imwrite(str(tmp_path / "labels.png"), np.full((480, 640), 2, np.uint16))
    with pytest.raises(DimensionMismatch):
        load_bundle(tmp_path)


def test_depth_size_mismatch(bundle_dir):
    write_pfm(bundle_dir / "depth.pfm", np.ones((10, 10)))
    with pytest.raises(DimensionMismatch):
        load_bundle(bundle_dir)


def test_unknown_label_id(bundle_dir):
    labels = read_gray(bundle_dir / "labels.png")
    labels[:5, :5] = 7
    cv2.imwrite(str(bundle_dir / "labels.png"), labels)
    with pytest.raises(UnknownElementId):
        load_bundle(bundle_dir)


@pytest.mark.parametrize("payload", [
    "not json",
    json.dumps({"items": []}),
    json.dumps({"elements": [{"id": "3", "name": "x"}]}),
    json.dumps({"elements": [{"id": 3}]}),
    json.dumps({"elements": [{"id": 1, "name": "reserved"}]}),
    json.dumps({"elements": [{"id": 3, "name": "a"}, {"id": 3, "name": "b"}]}),
    json.dumps({"elements": [{"id": 3, "name": "a", "category": 5}]}),
])
def test_malformed_catalog(bundle_dir, payload):
    (bundle_dir / "elements.json").write_text(payload)
    with pytest.raises(MalformedCatalog):
        load_bundle(bundle_dir)


def test_nan_depth_rejected(bundle_dir):
    depth = read_pfm(bundle_dir / "depth.pfm")
    depth[0, 0] = np.nan
    write_pfm(bundle_dir / "depth.pfm", depth)
    with pytest.raises(InvalidDepth):
        load_bundle(bundle_dir)


def test_sky_without_sentinel_rejected(bundle_dir):
    depth = read_pfm(bundle_dir / "depth.pfm")
    write_pfm(bundle_dir / "depth.pfm", np.where(np.isinf(depth), 50.0, depth))
    with pytest.raises(InvalidDepth):
        load_bundle(bundle_dir)


def test_sky_sentinel_becomes_twice_the_farthest_depth(bundle_dir):
    raw = read_pfm(bundle_dir / "depth.pfm")
    bundle = load_bundle(bundle_dir)
    sky = bundle.labels == 0
    assert sky.any()
    assert np.all(bundle.depth[sky] == 2 * raw[np.isfinite(raw)].max())
    assert np.isfinite(bundle.depth).all()


def test_resolve_sky_depth_without_geometry():
    np.testing.assert_array_equal(resolve_sky_depth(np.full((2, 2), np.inf)), np.ones((2, 2)))


def test_every_pixel_has_one_known_id(bundle_dir):
    bundle = load_bundle(bundle_dir)
    assert set(np.unique(bundle.labels)) <= bundle.catalog.ids | {0, 1}


# -- PFM -------------------------------------------------------------------------------

def test_pfm_layout_is_little_endian_bottom_up(tmp_path):
    plane = np.arange(6, dtype=np.float64).reshape(2, 3)
    write_pfm(tmp_path / "d.pfm", plane)
    data = (tmp_path / "d.pfm").read_bytes()
    assert data.startswith(b"Pf\n3 2\n-1.0\n")
    body = np.frombuffer(data[len(b"Pf\n3 2\n-1.0\n"):], dtype="<f4")
    np.testing.assert_array_equal(body, [3, 4, 5, 0, 1, 2])
    np.testing.assert_array_equal(read_pfm(tmp_path / "d.pfm"), plane)


def test_pfm_keeps_infinity(tmp_path):
    plane = np.array([[1.5, np.inf]])
    write_pfm(tmp_path / "d.pfm", plane)
    np.testing.assert_array_equal(read_pfm(tmp_path / "d.pfm"), plane)


# -- save_plane ----------------------------------------------------------------------------

def test_constant_plane_normalizes_to_black(tmp_path):
    save_plane(np.full((8, 8), 0.5), tmp_path / "p.png", normalize=True)
    assert not read_gray(tmp_path / "p.png").any()


def test_unit_range_scales_with_round_half_up(tmp_path):
    plane = np.array([[0.0, 0.5, 1.0, 1.5 / 255]])
    save_plane(plane, tmp_path / "p.png", normalize=True)
    # 0.5 * 255 = 127.5 and 1.5 rounds up to 128 and 2.
    np.testing.assert_array_equal(read_gray(tmp_path / "p.png"), [[0, 128, 255, 2]])


def test_ramp_becomes_byte_ramp(tmp_path):
    ramp = np.tile(np.linspace(0.0, 1.0, 256), (4, 1))
    save_plane(ramp, tmp_path / "p.png", normalize=True)
    np.testing.assert_array_equal(read_gray(tmp_path / "p.png")[0], np.arange(256))


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (6, 7), elements=st.floats(0.0, 1.0)))
def test_plane_round_trip_within_one_level(tmp_path_factory, plane):
    path = tmp_path_factory.mktemp("rt") / "p.png"
    save_plane(plane, path)
    back = read_gray(path) / 255.0
    assert np.abs(back - plane).max() <= 1 / 255 + 1e-12


# -- outputs ---------------------------------------------------------------------------------

def fake_outputs(n_iterations=3):
    report = EnhancementReport(
        "method", TargetColor.GREEN, False, [IterationRecord(i, 0.1 * i) for i in range(n_iterations)]
    )
    plane = np.linspace(0, 1, 24, dtype=np.float32).reshape(4, 6)
    maps = ConspicuitySet(plane, plane, plane, plane)
    return report, np.zeros((4, 6, 3)), maps


def test_outputs_write_seven_files(tmp_path):
    written = save_bundle_outputs(*fake_outputs(), tmp_path / "out")
    assert len(written) == 7
    assert sorted(p.name for p in (tmp_path / "out").iterdir()) == sorted(p.name for p in written)


def test_report_json_schema(tmp_path):
    save_bundle_outputs(*fake_outputs(3), tmp_path)
    report = json.loads((tmp_path / "report.json").read_text(encoding="utf-8"))
    assert set(report) == {"profile", "target_color", "converged", "iterations"}
    assert report["target_color"] == "Green"
    assert len(report["iterations"]) == 3
    assert report["iterations"][1] == {"index": 1, "ge": 0.1}


def test_unwritable_output_dir(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(IoError):
        save_bundle_outputs(*fake_outputs(), blocker / "out")
