"""Command-line entry point: ``bimsal enhance | synth | bench``.

Exit status is 0 when the enhancement converged, 2 when it ran but did not
converge (outputs are still written) and 1 on any error or usage problem.
"""
from __future__ import annotations

import argparse
import json
import statistics
import sys
import time
from dataclasses import dataclass, replace
from pathlib import Path

from .enhancer import DEFAULT_MAX_ITERS, enhance
from .errors import SceneError
from .profiles import resolve_profile
from .saliency import MODES
from .scene_io import load_bundle, save_bundle_outputs, save_plane, save_rgb
from .synth import generate_scene, load_spec

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CONVERGED = 2

BENCH_STAGES = ("channels", "vp", "combine", "recolor_loop")


@dataclass
class RunConfig:
    bundle_dir: Path
    out_dir: Path | None = None
    profile: str = "structure"
    mode: str = "perspective"
    max_iters: int = DEFAULT_MAX_ITERS
    emit_intermediates: bool = False
    rule_pack: Path | None = None
    seed: int | None = None


class _Stage:
    """Tracks which pipeline stage is running for error diagnostics."""

    def __init__(self):
        self.name = "setup"

    def __call__(self, name: str) -> "_Stage":
        self.name = name
        return self


def _fail(stage: str, exc: BaseException) -> int:
    print(f"error: stage {stage} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
    return EXIT_ERROR


def _intermediate_writer(directory: Path):
    directory.mkdir(parents=True, exist_ok=True)

    def write(index, image, saliency):
        save_rgb(image, directory / f"pass_{index:02d}.png")
        save_plane(saliency, directory / f"saliency_{index:02d}.png")

    return write


def run(config: RunConfig) -> int:
    """Load, classify, enhance and save one bundle; returns the exit status."""
    stage = _Stage()
    try:
        stage("profile")
        profile = resolve_profile(config.profile, config.rule_pack)
        stage("load")
        bundle = load_bundle(config.bundle_dir)

        observer = None
        if config.emit_intermediates:
            observer = _intermediate_writer(Path(config.out_dir) / "intermediates")
        stage("enhance")
        enhanced, report, maps = enhance(bundle, profile, config.mode, config.max_iters, observer=observer)
        stage("save")
        save_bundle_outputs(report, enhanced, maps, config.out_dir)
    except (SceneError, OSError, ValueError) as exc:
        return _fail(stage.name, exc)

    trajectory = " -> ".join(f"{it.ge:.4f}" for it in report.iterations)
    print(f"profile: {report.profile}")
    print(f"target color: {report.target.label}")
    print(f"ge: {trajectory}")
    print(f"passes: {report.passes}  converged: {str(report.converged).lower()}")
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


def synth(spec_path: Path, out_dir: Path, seed: int | None = None) -> int:
    try:
        spec = load_spec(spec_path)
        if seed is not None:
            spec = replace(spec, seed=seed)
        truth = generate_scene(spec, out_dir)
    except (SceneError, OSError) as exc:
        return _fail("synth", exc)
    print(f"wrote {out_dir}: {len(truth['objects'])} objects, "
          f"{truth['relevant_pixel_count']} relevant pixels for profile {truth['profile']}")
    return EXIT_OK


def benchmark(config: RunConfig, repeats: int) -> dict:
    """Median per-stage wall-clock seconds over ``repeats`` full runs.

    Raises:
        ValueError: if ``repeats`` is below 1.
    """
    if repeats < 1:
        raise ValueError(f"repeats must be >= 1, got {repeats}")
    profile = resolve_profile(config.profile, config.rule_pack)
    samples = {name: [] for name in BENCH_STAGES}
    totals = []
    for _ in range(repeats):
        timings = {}
        start = time.perf_counter()
        bundle = load_bundle(config.bundle_dir)
        enhance(bundle, profile, config.mode, config.max_iters, timings=timings)
        totals.append(time.perf_counter() - start)
        for name in BENCH_STAGES:
            samples[name].append(timings.get(name, 0.0))
    return {
        "bundle": str(config.bundle_dir),
        "mode": config.mode,
        "repeats": repeats,
        "stages": {name: statistics.median(values) for name, values in samples.items()},
        "total": statistics.median(totals),
    }


class _Parser(argparse.ArgumentParser):
    # Usage errors share exit status 1 with other failures; 2 means "not converged".
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bimsal", description="Profile-aware saliency enhancement of BIM renders.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("enhance", help="recolor a bundle so profile-relevant elements stand out")
    p.add_argument("--bundle", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--profile", required=True)
    p.add_argument("--mode", choices=MODES, default="perspective")
    p.add_argument("--max-iters", type=int, default=DEFAULT_MAX_ITERS)
    p.add_argument("--rules", type=Path, help="profiles.json rule pack")
    p.add_argument("--emit-intermediates", action="store_true",
                   help="also save every pass and its saliency map")

    p = sub.add_parser("synth", help="render a synthetic bundle from a JSON spec")
    p.add_argument("--spec", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--seed", type=int, help="override the seed given in --spec")

    p = sub.add_parser("bench", help="time the pipeline stages")
    p.add_argument("--bundle", required=True, type=Path)
    p.add_argument("--profile", required=True)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--mode", choices=MODES, default="perspective")
    p.add_argument("--max-iters", type=int, default=DEFAULT_MAX_ITERS)
    p.add_argument("--rules", type=Path)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "synth":
        return synth(args.spec, args.out, args.seed)

    config = RunConfig(
        bundle_dir=args.bundle,
        out_dir=getattr(args, "out", None),
        profile=args.profile,
        mode=args.mode,
        max_iters=args.max_iters,
        emit_intermediates=getattr(args, "emit_intermediates", False),
        rule_pack=args.rules,
    )
    if args.command == "enhance":
        return run(config)
    try:
        report = benchmark(config, args.repeats)
    except (SceneError, OSError, ValueError) as exc:
        return _fail("bench", exc)
    print(json.dumps(report, indent=2))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
