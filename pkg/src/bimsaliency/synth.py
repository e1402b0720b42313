"""Synthetic architectural scenes with known ground truth.

Two layouts are available. ``corridor`` renders a one-point-perspective
corridor: a frontal far wall around the vanishing point, side walls, an open
ceiling (sky) and a floor (ground), with painted lines converging on the
vanishing point. ``flat`` renders a single frontal backdrop, which is what the
pop-out suites use. Objects are pasted on top with their own element id and
constant depth.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import cv2
import numpy as np

from .errors import SceneError
from .profiles import DEFAULT_KEYWORDS, GROUND_ID, SKY_ID, Element, ElementCatalog, classify, resolve_profile
from .scene_io import SceneBundle, resolve_sky_depth, save_bundle, write_json

PALETTE = {
    "red": (0.85, 0.10, 0.10),
    "orange": (0.95, 0.55, 0.10),
    "yellow": (0.90, 0.85, 0.10),
    "green": (0.10, 0.70, 0.20),
    "cyan": (0.10, 0.70, 0.75),
    "blue": (0.15, 0.30, 0.85),
    "gray": (0.50, 0.50, 0.50),
    "white": (0.95, 0.95, 0.95),
    "black": (0.05, 0.05, 0.05),
}

FAR_WALL_FRACTION = 0.18
NEAR_DEPTH = 2.0
FAR_DEPTH = 30.0
LINE_WIDTH_DEG = 1.0
SUPERSAMPLE = 4
AXIS_MARGIN_DEG = 8.0


def to_rgb(color) -> np.ndarray:
    if isinstance(color, str):
        try:
            return np.array(PALETTE[color.lower()], dtype=np.float64)
        except KeyError:
            raise SceneError(f"unknown color {color!r}; known: {sorted(PALETTE)}") from None
    rgb = np.asarray(color, dtype=np.float64)
    if rgb.shape != (3,):
        raise SceneError(f"color must be a name or an [r, g, b] triple, got {color!r}")
    return np.clip(rgb, 0.0, 1.0)


@dataclass
class SynthObject:
    shape: str = "box"
    color: object = "gray"
    depth: float = 5.0
    relevant: bool = False
    off_perspective: bool = True
    x: float | None = None
    y: float | None = None
    w: float | None = None
    h: float | None = None
    name: str | None = None
    category: str | None = None
    material: str = ""

    def __post_init__(self):
        if self.shape not in ("box", "bar"):
            raise SceneError(f"object shape must be 'box' or 'bar', got {self.shape!r}")
        if self.depth < 0:
            raise SceneError("object depth must be non-negative")


@dataclass
class SynthSpec:
    width: int = 640
    height: int = 480
    vp: tuple[float, float] = (320.0, 240.0)
    n_radial_lines: int = 40
    objects: list[SynthObject] = field(default_factory=list)
    seed: int = 0
    layout: str = "corridor"
    profile: str = "method"
    wall_color: object = "gray"
    far_wall_color: object | None = None
    floor_color: object = (0.35, 0.35, 0.35)
    sky_color: object = (0.75, 0.85, 0.95)
    line_contrast: float = 0.4
    backdrop_depth: float = 10.0
    noise: float = 0.0
    far_wall: bool = True

    def __post_init__(self):
        self.objects = [o if isinstance(o, SynthObject) else SynthObject(**o) for o in self.objects]
        self.vp = tuple(float(v) for v in self.vp)
        if self.layout not in ("corridor", "flat"):
            raise SceneError(f"layout must be 'corridor' or 'flat', got {self.layout!r}")
        if self.width < 1 or self.height < 1:
            raise SceneError("width and height must be positive")

    @classmethod
    def from_json(cls, payload: dict) -> "SynthSpec":
        try:
            return cls(**payload)
        except TypeError as exc:
            raise SceneError(f"bad synth spec: {exc}") from exc

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class SynthScene:
    bundle: SceneBundle
    raw_depth: np.ndarray
    truth: dict
    object_masks: list[np.ndarray]
    line_coverage: np.ndarray


def run_lengths(mask: np.ndarray) -> list[list[int]]:
    """Row-major ``[start, length]`` runs of the True pixels in ``mask``."""
    flat = np.concatenate([[False], mask.ravel(), [False]])
    edges = np.flatnonzero(flat[1:] != flat[:-1])
    starts, stops = edges[::2], edges[1::2]
    return [[int(a), int(b - a)] for a, b in zip(starts, stops)]


def decode_run_lengths(runs, shape) -> np.ndarray:
    mask = np.zeros(int(np.prod(shape)), dtype=bool)
    for start, length in runs:
        mask[start : start + length] = True
    return mask.reshape(shape)


def _fill(canvas: np.ndarray, mask: np.ndarray, rgb: np.ndarray) -> None:
    canvas[mask] = rgb


def _draw_radial_lines(img, spec, rng, region):
    """Darken thin wedges converging on the vanishing point inside ``region``.

    Wedges keep a constant angular width, as painted lines on a receding
    surface do under perspective. Returns the line coverage in [0, 1].
    """
    h, w = img.shape[:2]
    coverage = np.zeros((h, w), dtype=np.float64)
    if spec.n_radial_lines <= 0:
        return coverage
    vx, vy = spec.vp
    reach = 4 * math.hypot(w, h)
    half = math.radians(LINE_WIDTH_DEG) / 2
    alpha = np.zeros((h * SUPERSAMPLE, w * SUPERSAMPLE), dtype=np.uint8)
    step = 360.0 / spec.n_radial_lines
    for k in range(spec.n_radial_lines):
        angle = (k + rng.uniform(0.2, 0.8)) * step
        # Nudge rays off the image axes; those are not perspective cues.
        off = angle % 90.0
        if off < AXIS_MARGIN_DEG:
            angle += AXIS_MARGIN_DEG - off
        elif off > 90.0 - AXIS_MARGIN_DEG:
            angle -= off - (90.0 - AXIS_MARGIN_DEG)
        rad = math.radians(angle)
        pts = [(vx, vy)] + [
            (vx + reach * math.cos(rad + d), vy + reach * math.sin(rad + d)) for d in (-half, half)
        ]
        # Pixel centers sit at integer coordinates, hence the half-pixel offset.
        sub = (np.array(pts) + 0.5) * SUPERSAMPLE - 0.5
        cv2.fillPoly(alpha, [np.round(sub * 16).astype(np.int32)], 255, cv2.LINE_8, shift=4)
    alpha = cv2.resize(alpha.astype(np.float32), (w, h), interpolation=cv2.INTER_AREA)
    coverage = (alpha.astype(np.float64) / 255.0) * region
    img *= (1.0 - spec.line_contrast * coverage)[..., None]
    return coverage


def _corridor(spec: SynthSpec, rng):
    h, w = spec.height, spec.width
    vx, vy = spec.vp
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    # Chebyshev-style normalized distance from the vp, 1 at the image border.
    hx = np.where(xx < vx, max(vx, 1.0), max(w - 1 - vx, 1.0))
    hy = np.where(yy < vy, max(vy, 1.0), max(h - 1 - vy, 1.0))
    u = (xx - vx) / hx
    v = (yy - vy) / hy
    s = np.maximum(np.abs(u), np.abs(v))

    labels = np.full((h, w), 2, dtype=np.uint16)
    far = s <= (FAR_WALL_FRACTION if spec.far_wall else -1.0)
    ceiling = ~far & (v <= -np.abs(u))
    floor = ~far & (v >= np.abs(u))
    left = ~far & ~ceiling & ~floor & (u < 0)
    right = ~far & ~ceiling & ~floor & (u >= 0)
    labels[ceiling] = SKY_ID
    labels[floor] = GROUND_ID
    labels[left] = 2
    labels[right] = 3
    labels[far] = 4

    s0 = FAR_WALL_FRACTION if spec.far_wall else 0.0
    t = np.clip((s - s0) / (1.0 - s0), 0.0, 1.0)
    depth = FAR_DEPTH + (NEAR_DEPTH - FAR_DEPTH) * t
    depth[far] = FAR_DEPTH
    depth[ceiling] = np.inf

    img = np.zeros((h, w, 3), dtype=np.float64)
    wall = to_rgb(spec.wall_color)
    _fill(img, left | right, wall)
    _fill(img, far, to_rgb(spec.far_wall_color) if spec.far_wall_color is not None else wall)
    _fill(img, floor, to_rgb(spec.floor_color))
    _fill(img, ceiling, to_rgb(spec.sky_color))
    lines = _draw_radial_lines(img, spec, rng, (~far & ~ceiling).astype(np.float64))

    elements = [
        Element(2, "left wall", "wall", "concrete"),
        Element(3, "right wall", "wall", "concrete"),
    ]
    if far.any():
        elements.append(Element(4, "far wall", "wall", "concrete"))
    return img, depth, labels, elements, lines


def _flat(spec: SynthSpec, rng):
    h, w = spec.height, spec.width
    img = np.empty((h, w, 3), dtype=np.float64)
    img[:] = to_rgb(spec.wall_color)
    depth = np.full((h, w), float(spec.backdrop_depth))
    labels = np.full((h, w), 2, dtype=np.uint16)
    lines = _draw_radial_lines(img, spec, rng, np.ones((h, w)))
    return img, depth, labels, [Element(2, "backdrop wall", "wall", "concrete")], lines


def _object_names(obj: SynthObject, index: int, profile: str) -> tuple[str, str]:
    if obj.category is not None:
        category = obj.category
    elif obj.relevant:
        category = DEFAULT_KEYWORDS.get(profile, ("crane",))[0]
    else:
        category = "furniture"
    return obj.name or f"{category} {index}", category


def _object_mask(obj: SynthObject, spec: SynthSpec, rng) -> np.ndarray:
    h, w = spec.height, spec.width
    if obj.shape == "bar":
        ow = obj.w if obj.w is not None else rng.uniform(0.02, 0.04) * w
        oh = obj.h if obj.h is not None else rng.uniform(0.35, 0.55) * h
    else:
        ow = obj.w if obj.w is not None else rng.uniform(0.06, 0.12) * w
        oh = obj.h if obj.h is not None else rng.uniform(0.06, 0.12) * h
    x0 = obj.x if obj.x is not None else rng.uniform(0.05 * w, 0.95 * w - ow)
    y0 = obj.y if obj.y is not None else rng.uniform(0.05 * h, 0.95 * h - oh)
    mask = np.zeros((h, w), dtype=np.uint8)
    if obj.off_perspective:
        cv2.rectangle(mask, (int(round(x0)), int(round(y0))),
                      (int(round(x0 + ow)) - 1, int(round(y0 + oh)) - 1), 1, -1)
    else:
        # A wedge bounded by two rays from the vanishing point.
        vx, vy = spec.vp
        cx, cy = x0 + ow / 2, y0 + oh / 2
        ang = math.atan2(cy - vy, cx - vx)
        r_mid = math.hypot(cx - vx, cy - vy)
        half_len = max(ow, oh) / 2
        r0, r1 = max(r_mid - half_len, 1.0), r_mid + half_len
        spread = min(ow, oh) / 2 / max(r_mid, 1.0)
        pts = []
        for r, a in ((r0, ang - spread), (r1, ang - spread), (r1, ang + spread), (r0, ang + spread)):
            pts.append((vx + r * math.cos(a), vy + r * math.sin(a)))
        cv2.fillPoly(mask, [np.round(np.array(pts) * 16).astype(np.int32)], 1, cv2.LINE_8, shift=4)
    return mask.astype(bool)


def build_scene(spec: SynthSpec) -> SynthScene:
    """Render ``spec`` into an in-memory bundle plus its ground truth."""
    rng = np.random.default_rng(spec.seed)
    img, depth, labels, elements, lines = (_corridor if spec.layout == "corridor" else _flat)(spec, rng)

    masks = []
    next_id = max(e.id for e in elements) + 1
    for index, obj in enumerate(spec.objects):
        mask = _object_mask(obj, spec, rng)
        name, category = _object_names(obj, index, spec.profile)
        elements.append(Element(next_id, name, category, obj.material))
        img[mask] = to_rgb(obj.color)
        depth[mask] = obj.depth
        labels[mask] = next_id
        next_id += 1
        masks.append(mask)

    if spec.noise > 0:
        img += rng.normal(0.0, spec.noise, img.shape)
    img = np.clip(img, 0.0, 1.0)
    # Quantize so the in-memory bundle equals what load_bundle would read back.
    img = np.floor(img * 255.0 + 0.5) / 255.0
    depth = depth.astype(np.float32).astype(np.float64)

    catalog = ElementCatalog(elements)
    relevance = classify(catalog, resolve_profile(spec.profile))
    objects = []
    for element, obj, mask in zip(elements[-len(masks):] if masks else [], spec.objects, masks):
        visible = labels == element.id
        objects.append({
            "id": element.id,
            "name": element.name,
            "relevant": bool(relevance[element.id]),
            "off_perspective": obj.off_perspective,
            "depth": float(obj.depth),
            "pixel_count": int(visible.sum()),
            "pixels": run_lengths(visible),
        })
    relevant_mask = np.isin(labels, [i for i, r in relevance.items() if r])
    truth = {
        "vp": list(spec.vp),
        "profile": spec.profile,
        "relevant_pixel_count": int(relevant_mask.sum()),
        "irrelevant_pixel_count": int((~relevant_mask).sum()),
        "objects": objects,
    }
    bundle = SceneBundle(img, resolve_sky_depth(depth), labels, catalog)
    visible_masks = [labels == o["id"] for o in objects]
    for mask in masks:
        lines[mask] = 0.0
    return SynthScene(bundle, depth, truth, visible_masks, lines)


def generate_scene(spec: SynthSpec, out_dir: str | Path) -> dict:
    """Write the bundle for ``spec`` plus ``truth.json``; returns the truth manifest."""
    scene = build_scene(spec)
    save_bundle(scene.bundle, out_dir, raw_depth=scene.raw_depth)
    write_json(Path(out_dir) / "truth.json", scene.truth)
    return scene.truth


def load_spec(path: str | Path) -> SynthSpec:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SceneError(f"cannot read synth spec {path}: {exc}") from exc
    return SynthSpec.from_json(payload)
