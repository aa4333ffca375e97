"""Command-line entry points.

Three subcommands: ``curve`` writes boundary JSON files, ``minimal`` trains
a minimal surface spanning a boundary, ``reconstruct`` fits a current to an
open target mesh.  Training config resolves in precedence order: CLI flags
over JSON config file over built-in defaults.

Exit codes: 0 success, 2 bad config or input, 3 numerical failure during
training.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import torch

from ._rng import stream
from .currents import MetricSpec, mass_estimate
from .evaluation import EvalReport, ucd
from .extract import (export_current_grid, export_mesh,
                      filter_boundary_vertices, level_from_boundary,
                      marching_cubes, sample_grid)
from .geometry import (CURVE_KINDS, generate_curve, load_curve, load_mesh,
                       normalize_mesh, save_curve)
from .optim import (NumericalError, TrainConfig, save_checkpoint,
                    train_minimal_surface, train_reconstruction)

# argparse dest -> TrainConfig key, for flags that map one-to-one.
_CONFIG_FLAGS = [
    ("iterations", "iterations"),
    ("ambient_batch", "ambient_batch"),
    ("surface_batch", "surface_batch"),
    ("lr", "base_lr"),
    ("decay_factor", "decay_factor"),
    ("decay_every", "decay_every"),
    ("seed", "seed"),
    ("alpha_scale", "alpha_scale"),
    ("sigma_w", "sigma_w"),
    ("delta", "delta"),
    ("eps_low", "eps_low"),
    ("eps_high", "eps_high"),
    ("log_every", "log_every"),
    ("mass_every", "mass_every"),
    ("mass_samples", "mass_samples"),
]
_FIELD_FLAGS = [
    ("rff_features", "m"),
    ("width", "width"),
    ("hidden_layers", "hidden_layers"),
    ("sigma_rff", "sigma_rff"),
    ("dtype", "dtype"),
]


def _add_train_flags(p: argparse.ArgumentParser, reconstruction: bool) -> None:
    p.add_argument("--config", metavar="JSON",
                   help="config file; flags given here still win")
    p.add_argument("--out-dir", required=True, metavar="DIR",
                   help="directory for checkpoint, loss CSV, mesh, report")
    p.add_argument("--seed", type=int, help="master seed (default 0)")
    p.add_argument("--iterations", type=int, help="training steps")
    p.add_argument("--ambient-batch", type=int,
                   help="points sampled from [-1,1]^3 per step")
    p.add_argument("--lr", type=float, help="base learning rate before decay")
    p.add_argument("--decay-factor", type=float,
                   help="learning rate multiplier per decay interval")
    p.add_argument("--decay-every", type=int,
                   help="iterations between learning rate decays")
    p.add_argument("--alpha-scale", type=float,
                   help="magnitude of the boundary field term")
    p.add_argument("--log-every", type=int, help="CSV logging interval")
    p.add_argument("--mass-every", type=int, help="mass estimate interval")
    p.add_argument("--mass-samples", type=int,
                   help="Monte-Carlo samples per mass estimate")
    p.add_argument("--rff-features", type=int, metavar="M",
                   help="Fourier frequency count (feature dim is 2M)")
    p.add_argument("--width", type=int, help="hidden layer width")
    p.add_argument("--hidden-layers", type=int, help="hidden layer count")
    p.add_argument("--sigma-rff", type=float,
                   help="stddev of the Gaussian frequency matrix")
    p.add_argument("--dtype", choices=["float32", "float64"],
                   help="compute precision of the field")
    p.add_argument("--no-rff", action="store_true",
                   help="ablation: feed raw coordinates to the MLP")
    p.add_argument("--relu", action="store_true",
                   help="ablation: ReLU activations instead of softplus")
    if reconstruction:
        p.add_argument("--surface-batch", type=int,
                       help="target-surface samples per step")
        p.add_argument("--sigma-w", type=float,
                       help="bandwidth of the boundary distance weight")
        p.add_argument("--delta", type=float,
                       help="margin of the surface crossing hinge")
        p.add_argument("--eps-low", type=float,
                       help="lower bound of the normal offset draw")
        p.add_argument("--eps-high", type=float,
                       help="upper bound of the normal offset draw")
        p.add_argument("--no-surface-loss", action="store_true",
                       help="ablation: drop the surface crossing term")
        p.add_argument("--no-boundary-weighting", action="store_true",
                       help="ablation: uniform metric weight everywhere")
        p.add_argument("--eval-samples", type=int, default=100000,
                       help="samples for the final distance metric")
    p.add_argument("--resolution", type=int, default=128,
                   help="extraction grid resolution per axis")
    p.add_argument("--delta-filter", type=float, default=5e-3,
                   help="drop extracted vertices where |omega| falls below this")
    p.add_argument("--export-grid", type=int, metavar="RES",
                   help="also dump the raw vector field at this resolution")
    p.add_argument("--threads", type=int,
                   help="cap math-library worker threads")
    p.add_argument("--print-config", action="store_true",
                   help="print the resolved config as JSON and exit")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="massmin",
        description="Minimal surfaces and open-surface reconstruction "
                    "via neural currents.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_curve = sub.add_parser("curve", help="write a boundary curve JSON file")
    p_curve.add_argument("--kind", required=True, choices=sorted(CURVE_KINDS),
                         help="curve family")
    p_curve.add_argument("--segments", type=int, default=256,
                         help="vertices per loop")
    p_curve.add_argument("--scale", type=float, default=1.0,
                         help="uniform scale about the origin")
    p_curve.add_argument("--out", required=True, help="output JSON path")
    p_curve.set_defaults(func=cmd_curve)

    p_min = sub.add_parser("minimal",
                           help="train a minimal surface spanning a boundary")
    p_min.add_argument("--boundary", required=True,
                       help="boundary curve JSON file")
    _add_train_flags(p_min, reconstruction=False)
    p_min.set_defaults(func=cmd_minimal)

    p_rec = sub.add_parser("reconstruct",
                           help="fit a current to an open target mesh")
    p_rec.add_argument("--target", required=True,
                       help="target OBJ mesh (must have a boundary)")
    _add_train_flags(p_rec, reconstruction=True)
    p_rec.set_defaults(func=cmd_reconstruct)
    return parser


def _resolve_config(args, defaults: TrainConfig) -> TrainConfig:
    data = defaults.to_dict()
    if args.config:
        loaded = json.loads(Path(args.config).read_text())
        if not isinstance(loaded, dict):
            raise ValueError(f"{args.config}: expected a JSON object")
        field_part = loaded.pop("field", None)
        unknown = set(loaded) - set(data)
        if unknown:
            raise ValueError(f"{args.config}: unknown keys {sorted(unknown)}")
        data.update(loaded)
        if field_part is not None:
            unknown = set(field_part) - set(data["field"])
            if unknown:
                raise ValueError(
                    f"{args.config}: unknown field keys {sorted(unknown)}")
            data["field"].update(field_part)
    for dest, key in _CONFIG_FLAGS:
        value = getattr(args, dest, None)
        if value is not None:
            data[key] = value
    for dest, key in _FIELD_FLAGS:
        value = getattr(args, dest, None)
        if value is not None:
            data["field"][key] = value
    if args.no_rff:
        data["field"]["use_rff"] = False
    if args.relu:
        data["field"]["activation"] = "relu"
    if getattr(args, "no_surface_loss", False):
        data["use_surface_loss"] = False
    if getattr(args, "no_boundary_weighting", False):
        data["boundary_weighting"] = False
    return TrainConfig.from_dict(data)


def _ablation_flags(config: TrainConfig, reconstruction: bool) -> dict:
    flags = {
        "no_rff": not config.field.use_rff,
        "relu": config.field.activation == "relu",
    }
    if reconstruction:
        flags["no_surface_loss"] = not config.use_surface_loss
        flags["no_boundary_weighting"] = not config.boundary_weighting
    return flags


def _extract_artifacts(current, args, out_dir: Path):
    grid = sample_grid(current, args.resolution)
    level = level_from_boundary(current)
    raw = marching_cubes(grid, level)
    extracted = filter_boundary_vertices(raw, current, args.delta_filter)
    export_mesh(extracted.mesh, out_dir / "surface.obj")
    if args.export_grid:
        export_current_grid(current, args.export_grid, out_dir / "omega.raw")
    return extracted


def cmd_curve(args) -> int:
    curve = generate_curve(args.kind, args.segments, args.scale)
    save_curve(curve, args.out)
    print(f"wrote {args.out}: {curve.num_loops} loop(s), "
          f"{sum(len(l) for l in curve.loops)} vertices")
    return 0


def cmd_minimal(args) -> int:
    config = _resolve_config(args, TrainConfig.minimal_defaults())
    if args.print_config:
        print(json.dumps(config.to_dict(), indent=2, sort_keys=True))
        return 0
    boundary = load_curve(args.boundary)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    current, _ = train_minimal_surface(boundary, config,
                                       log_path=out_dir / "loss.csv")
    save_checkpoint(out_dir / "checkpoint.mmck", current)
    extracted = _extract_artifacts(current, args, out_dir)

    mass, stderr = mass_estimate(current, MetricSpec.euclidean(),
                                 config.mass_samples,
                                 stream(config.seed, "eval"))
    report = EvalReport(ucd=None, n_samples=config.mass_samples,
                        seed=config.seed, mass=mass, mass_stderr=stderr,
                        ablations=_ablation_flags(config, False))
    report.save(out_dir / "report.json")
    print(f"mass {mass:.6e} (stderr {stderr:.1e}), "
          f"{extracted.mesh.num_vertices} vertices kept")
    return 0


def cmd_reconstruct(args) -> int:
    config = _resolve_config(args, TrainConfig.reconstruction_defaults())
    if args.print_config:
        print(json.dumps(config.to_dict(), indent=2, sort_keys=True))
        return 0
    target, _ = normalize_mesh(load_mesh(args.target))
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    current, _ = train_reconstruction(target, config,
                                      log_path=out_dir / "loss.csv")
    save_checkpoint(out_dir / "checkpoint.mmck", current)
    extracted = _extract_artifacts(current, args, out_dir)

    eval_rng = stream(config.seed, "eval")
    distance = None
    if extracted.mesh.num_faces:
        distance = ucd(target, extracted.mesh, args.eval_samples, eval_rng)
    mass, stderr = mass_estimate(current, MetricSpec.euclidean(),
                                 config.mass_samples, eval_rng)
    report = EvalReport(ucd=distance, n_samples=args.eval_samples,
                        seed=config.seed, mass=mass, mass_stderr=stderr,
                        ablations=_ablation_flags(config, True))
    report.save(out_dir / "report.json")
    shown = "n/a" if distance is None else f"{distance:.6f}"
    print(f"ucd {shown}, mass {mass:.6e}, "
          f"{extracted.mesh.num_vertices} vertices kept")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", None):
        torch.set_num_threads(args.threads)
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
