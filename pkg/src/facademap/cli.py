"""Command line interface: ``simulate``, ``run-pipeline``, ``evaluate``.

Batch and non-interactive; exit code 0 iff the requested artifacts were
fully written. A bundled example scene is available via
``facademap simulate --scene builtin:street_tree ...``.
"""

from __future__ import annotations

import argparse
import os
import sys
from importlib import resources

from .dataset import PipelineConfig, load_config
from .pipeline import PipelineError, evaluate_run, run_pipeline
from .simulator import simulate_scene_file

__all__ = ["main", "builtin_scene_path"]


def builtin_scene_path(name: str) -> str:
    """Filesystem path of a scene shipped with the package."""
    path = resources.files("facademap") / "scenes" / f"{name}.scene"
    if not path.is_file():
        raise FileNotFoundError(f"no bundled scene named {name!r}")
    return str(path)


def _resolve_scene(raw: str) -> str:
    if raw.startswith("builtin:"):
        return builtin_scene_path(raw[len("builtin:") :])
    return raw


def _dataset_paths(args) -> tuple[str, str, str, str]:
    names = {
        "points": "points.txt",
        "frames": "frames.txt",
        "cadastre": "cadastre.txt",
        "cameras": "cameras.txt",
    }
    out = []
    for key, default_name in names.items():
        explicit = getattr(args, key)
        if explicit:
            out.append(explicit)
        elif args.dataset:
            out.append(os.path.join(args.dataset, default_name))
        else:
            raise SystemExit(f"error: provide --{key} or --dataset")
    return tuple(out)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="facademap",
        description="Facade mapping pipeline and street-scene simulator.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="synthesize a dataset plus ground truth")
    sim.add_argument("--scene", required=True, help="scene file, or builtin:<name>")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", required=True, help="output directory")

    run = sub.add_parser("run-pipeline", help="run the facade mapping pipeline")
    run.add_argument("--dataset", help="directory holding the standard dataset file names")
    run.add_argument("--points")
    run.add_argument("--frames")
    run.add_argument("--cadastre")
    run.add_argument("--cameras")
    run.add_argument("--config", help="pipeline config file (defaults apply if omitted)")
    run.add_argument("--out", required=True)
    run.add_argument("--threads", type=int, default=0, help="0 = all cores")
    run.add_argument("--verbose", action="store_true")

    ev = sub.add_parser("evaluate", help="compare a run against simulator truth")
    ev.add_argument("--run", required=True, help="pipeline output directory")
    ev.add_argument("--truth", required=True, help="truth directory written by simulate")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            simulate_scene_file(_resolve_scene(args.scene), args.seed, args.out)
        elif args.command == "run-pipeline":
            points, frames, cadastre, cameras = _dataset_paths(args)
            cfg = load_config(args.config) if args.config else PipelineConfig()
            run_pipeline(
                points,
                frames,
                cadastre,
                cameras,
                cfg,
                args.out,
                threads=args.threads or None,
                verbose=args.verbose,
            )
        else:
            table = evaluate_run(args.run, args.truth)
            with open(os.path.join(args.run, "metrics.txt"), "w", encoding="utf-8") as f:
                f.write(table)
            sys.stdout.write(table)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
