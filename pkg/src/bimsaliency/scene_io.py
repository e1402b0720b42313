"""Scene bundle loading and saving.

A bundle directory holds four pixel-aligned files::

    image.png      8-bit RGB render
    depth.pfm      1-channel float32 depth in meters, +inf where there is no geometry
    labels.png     16-bit grayscale element ids (0 = sky, 1 = ground)
    elements.json  {"elements": [{"id", "name", "category", "material"}, ...]}

Rasters live in memory as numpy arrays indexed ``[row, col]``: the image is
``float64`` of shape (H, W, 3) in [0, 1] (gamma-encoded, no linearization),
depth is ``float64`` (H, W) and labels are ``uint16`` (H, W).
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING

import cv2
import numpy as np

from .errors import (
    DimensionMismatch,
    InvalidDepth,
    IoError,
    MalformedCatalog,
    MissingFile,
    UnknownElementId,
)
from .profiles import RESERVED_IDS, SKY_ID, ElementCatalog

if TYPE_CHECKING:
    from .attention import ConspicuitySet
    from .enhancer import EnhancementReport

IMAGE_FILE = "image.png"
DEPTH_FILE = "depth.pfm"
LABELS_FILE = "labels.png"
CATALOG_FILE = "elements.json"

CONSPICUITY_FILES = {
    "intensity": "conspicuity_intensity.png",
    "color": "conspicuity_color.png",
    "orientation": "conspicuity_orientation.png",
    "depth": "conspicuity_depth.png",
}


@dataclass
class SceneBundle:
    image: np.ndarray
    depth: np.ndarray
    labels: np.ndarray
    catalog: ElementCatalog

    @property
    def shape(self) -> tuple[int, int]:
        return self.image.shape[:2]

    def with_image(self, image: np.ndarray) -> "SceneBundle":
        return SceneBundle(image, self.depth, self.labels, self.catalog)


def resolve_sky_depth(depth: np.ndarray) -> np.ndarray:
    """Replace the +inf "no geometry" sentinel by twice the farthest finite depth."""
    depth = np.asarray(depth, dtype=np.float64)
    finite = np.isfinite(depth)
    if finite.all():
        return depth.copy()
    far = depth[finite].max() if finite.any() else 0.0
    return np.where(finite, depth, 2.0 * far if far > 0 else 1.0)


def validate_bundle(bundle: SceneBundle) -> None:
    """Check the cross-file invariants of an in-memory bundle.

    Raises:
        DimensionMismatch, UnknownElementId, InvalidDepth
    """
    h, w = bundle.image.shape[:2]
    if bundle.image.ndim != 3 or bundle.image.shape[2] != 3:
        raise DimensionMismatch(f"image must be HxWx3, got {bundle.image.shape}")
    for name, raster in (("depth", bundle.depth), ("labels", bundle.labels)):
        if raster.shape != (h, w):
            raise DimensionMismatch(f"{name} is {raster.shape[1]}x{raster.shape[0]}, image is {w}x{h}")
    if not np.isfinite(bundle.depth).all() or (bundle.depth < 0).any():
        raise InvalidDepth("depth must be finite and non-negative once the sky sentinel is resolved")
    ids = {int(i) for i in np.unique(bundle.labels)}
    unknown = sorted(ids - set(RESERVED_IDS) - bundle.catalog.ids)
    if unknown:
        raise UnknownElementId(f"label ids missing from the catalog: {unknown}")


# -- PFM ---------------------------------------------------------------------

def read_pfm(path: str | Path) -> np.ndarray:
    """Read a single-channel PFM file into a float64 (H, W) array, top row first."""
    data = Path(path).read_bytes()
    header = []
    pos = 0
    while len(header) < 3:
        end = data.index(b"\n", pos)
        line = data[pos:end].strip()
        pos = end + 1
        if line and not line.startswith(b"#"):
            header.append(line)
    if header[0] != b"Pf":
        raise InvalidDepth(f"{path}: expected a 1-channel 'Pf' PFM, got {header[0]!r}")
    w, h = (int(v) for v in header[1].split())
    scale = float(header[2])
    dtype = "<f4" if scale < 0 else ">f4"
    samples = np.frombuffer(data, dtype=dtype, count=w * h, offset=pos)
    return np.flipud(samples.reshape(h, w)).astype(np.float64)


def write_pfm(path: str | Path, plane: np.ndarray) -> None:
    """Write a little-endian single-channel PFM (scale line ``-1.0``)."""
    plane = np.asarray(plane, dtype="<f4")
    h, w = plane.shape
    header = f"Pf\n{w} {h}\n-1.0\n".encode("ascii")
    Path(path).write_bytes(header + np.ascontiguousarray(np.flipud(plane)).tobytes())


# -- loading -----------------------------------------------------------------

def _require(directory: Path, name: str) -> Path:
    path = directory / name
    if not path.is_file():
        raise MissingFile(f"bundle file missing: {path}")
    return path


def read_rgb(path: str | Path) -> np.ndarray:
    raw = cv2.imread(str(path), cv2.IMREAD_COLOR)
    if raw is None:
        raise IoError(f"cannot decode image {path}")
    if raw.dtype != np.uint8:
        raw = (raw / 257.0).round().astype(np.uint8)
    return cv2.cvtColor(raw, cv2.COLOR_BGR2RGB).astype(np.float64) / 255.0


def load_bundle(directory: str | Path) -> SceneBundle:
    """Load and validate a scene bundle directory.

    Raises:
        MissingFile: a bundle file is absent.
        DimensionMismatch: rasters disagree in size.
        UnknownElementId: the mask holds an id the catalog does not list.
        MalformedCatalog: ``elements.json`` does not follow the schema.
        InvalidDepth: the depth raster is unusable.
    """
    directory = Path(directory)
    image_path = _require(directory, IMAGE_FILE)
    depth_path = _require(directory, DEPTH_FILE)
    labels_path = _require(directory, LABELS_FILE)
    catalog_path = _require(directory, CATALOG_FILE)

    try:
        catalog = ElementCatalog.from_json(json.loads(catalog_path.read_text(encoding="utf-8")))
    except json.JSONDecodeError as exc:
        raise MalformedCatalog(f"{catalog_path}: {exc}") from exc

    image = read_rgb(image_path)
    labels = cv2.imread(str(labels_path), cv2.IMREAD_UNCHANGED)
    if labels is None:
        raise IoError(f"cannot decode label mask {labels_path}")
    if labels.ndim != 2:
        raise DimensionMismatch(f"label mask must be single-channel, got shape {labels.shape}")
    labels = labels.astype(np.uint16)
    raw_depth = read_pfm(depth_path)

    h, w = image.shape[:2]
    for name, raster in (("labels.png", labels), ("depth.pfm", raw_depth)):
        if raster.shape != (h, w):
            raise DimensionMismatch(
                f"{name} is {raster.shape[1]}x{raster.shape[0]} but image.png is {w}x{h}"
            )
    if np.isnan(raw_depth).any() or (raw_depth < 0).any():
        raise InvalidDepth(f"{depth_path}: NaN or negative samples")
    sky = labels == SKY_ID
    if not np.isposinf(raw_depth[sky]).all():
        raise InvalidDepth(f"{depth_path}: sky pixels must carry the +inf sentinel")

    bundle = SceneBundle(image, resolve_sky_depth(raw_depth), labels, catalog)
    validate_bundle(bundle)
    return bundle


# -- saving ------------------------------------------------------------------

def _to_bytes(values: np.ndarray) -> np.ndarray:
    """Map [0, 1] floats to uint8 with round-half-up."""
    return np.floor(np.clip(values, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def _imwrite(path: Path, array: np.ndarray) -> None:
    try:
        ok = cv2.imwrite(str(path), array)
    except cv2.error as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    if not ok:
        raise IoError(f"cannot write {path}")


def save_plane(plane: np.ndarray, path: str | Path, normalize: bool = False) -> None:
    """Write a single-channel float plane as an 8-bit grayscale PNG.

    With ``normalize`` the plane is stretched so that its minimum maps to 0
    and its maximum to 255; a constant plane becomes all zeros. Without it
    samples are clipped to [0, 1] and scaled by 255.
    """
    plane = np.asarray(plane, dtype=np.float64)
    if normalize:
        lo, hi = plane.min(), plane.max()
        plane = (plane - lo) / (hi - lo) if hi > lo else np.zeros_like(plane)
    _imwrite(Path(path), _to_bytes(plane))


def save_rgb(image: np.ndarray, path: str | Path) -> None:
    _imwrite(Path(path), cv2.cvtColor(_to_bytes(image), cv2.COLOR_RGB2BGR))


def save_labels(labels: np.ndarray, path: str | Path) -> None:
    _imwrite(Path(path), np.asarray(labels, dtype=np.uint16))


def save_bundle(bundle: SceneBundle, directory: str | Path, raw_depth: np.ndarray | None = None) -> None:
    """Write a bundle in the on-disk layout.

    ``raw_depth`` keeps the +inf sky sentinel; when omitted the sentinel is
    restored from the label mask.
    """
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create {directory}: {exc}") from exc
    if raw_depth is None:
        raw_depth = np.where(bundle.labels == SKY_ID, np.inf, bundle.depth)
    save_rgb(bundle.image, directory / IMAGE_FILE)
    save_labels(bundle.labels, directory / LABELS_FILE)
    write_json(directory / CATALOG_FILE, bundle.catalog.to_json())
    try:
        write_pfm(directory / DEPTH_FILE, raw_depth)
    except OSError as exc:
        raise IoError(f"cannot write depth: {exc}") from exc


def write_json(path: str | Path, payload) -> None:
    try:
        Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def save_bundle_outputs(
    report: "EnhancementReport",
    enhanced: np.ndarray,
    maps: "ConspicuitySet",
    out_dir: str | Path,
    saliency: np.ndarray | None = None,
) -> list[Path]:
    """Write enhanced.png, saliency.png, the four conspicuity PNGs and report.json.

    Returns the written paths.
    """
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create output directory {out_dir}: {exc}") from exc
    if saliency is None:
        from .saliency import combine

        saliency = combine(maps)

    written = [out_dir / "enhanced.png", out_dir / "saliency.png"]
    save_rgb(enhanced, written[0])
    save_plane(saliency, written[1])
    for channel, filename in CONSPICUITY_FILES.items():
        path = out_dir / filename
        save_plane(getattr(maps, channel), path)
        written.append(path)
    written.append(out_dir / "report.json")
    write_json(written[-1], report.to_json())
    return written
