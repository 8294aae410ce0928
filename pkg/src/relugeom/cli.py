"""Command-line interface: ``relugeom <command> [options]``.

Every command writes a JSON result (to ``--out`` or stdout) that echoes the
configuration, seed, tool version and wall time. Primary artifacts (CSV,
SVG, model files) carry no timing data, so identical inputs and seed give
byte-identical files.

Exit codes: 0 success, 2 usage error, 3 numerical non-convergence, 4 i/o error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from ._validation import ArchitectureError, NotConvergedError, TrainingDivergedError
from .net import Mlp, NetworkArch, init_mlp

EXIT_OK, EXIT_USAGE, EXIT_NONCONVERGED, EXIT_IO = 0, 2, 3, 4

logger = logging.getLogger("relugeom")


class UsageError(Exception):
    pass


def _arch(text: str) -> NetworkArch:
    try:
        return NetworkArch.parse(text)
    except ArchitectureError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _box(text: str) -> np.ndarray:
    from .regions import as_box

    try:
        return as_box(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return value


def _config(args) -> dict:
    out = {}
    for key, value in sorted(vars(args).items()):
        if key == "func" or key.startswith("_"):
            continue
        if isinstance(value, np.ndarray):
            value = value.tolist()
        elif isinstance(value, NetworkArch):
            value = list(value.widths)
        out[key] = value
    return out


def _emit(args, result: dict, start: float) -> None:
    doc = {
        "command": args.command,
        "version": __version__,
        "seed": getattr(args, "seed", None),
        "config": _config(args),
        "result": result,
        "wall_time": time.perf_counter() - start,
    }
    text = json.dumps(doc, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


# commands ---------------------------------------------------------------------


def cmd_bound(args) -> int:
    from .complexity import network_bound

    arch = args.arch or args.arch_pos
    if arch is None:
        raise UsageError("bound needs an architecture (positional or --arch)")
    bound = network_bound(arch)
    if args.out is None and not args.json:
        print(bound.value)
        print(f"log10 {bound.log10:.6f}")
        return EXIT_OK
    _emit(args, {"arch": list(arch.widths), "bound": str(bound.value),
                 "log10": bound.log10}, args._start)
    return EXIT_OK


def _load_net(args) -> Mlp:
    if args.model:
        data = json.loads(Path(args.model).read_text())
        if data.get("format") == "relugeom.autoencoder":
            return Mlp.from_dict(data["encoder"])
        return Mlp.from_dict(data)
    if args.arch is None:
        raise UsageError("regions needs --model or --arch")
    return init_mlp(args.arch, args.seed)


def cmd_regions(args) -> int:
    from .regions import (as_box, count_regions_sampled, decomposition_svg,
                          enumerate_regions)
    from .complexity import network_bound

    mlp = _load_net(args)
    dim = mlp.arch.input_dim
    box = as_box(args.box if args.box is not None else [(-1.0, 1.0)] * dim, dim)
    bound = network_bound(mlp.arch)
    result = {"arch": list(mlp.arch.widths), "mode": args.mode,
              "bound": str(bound.value), "bound_log10": bound.log10}
    if args.mode == "exact":
        cells = enumerate_regions(mlp, box, tol=args.tol)
        result.update(cells.to_dict())
        if args.csv:
            cells.write_csv(args.csv)
        if args.svg:
            decomposition_svg(cells, args.svg)
    else:
        count = count_regions_sampled(mlp, box, resolution=args.resolution)
        result.update(count=count, within_bound=count <= bound.value,
                      resolution=args.resolution, box=box.tolist())
    if not result["within_bound"]:
        logger.error("region count exceeds the architecture bound")
    _emit(args, result, args._start)
    return EXIT_OK


def _curve(args):
    from . import manifolds as mf

    if args.kind == "spiral":
        return mf.spiral(args.a, args.b, args.w, args.T, args.n)
    if args.kind == "peano":
        return mf.peano_curve(args.order)
    if args.kind == "polygon":
        return mf.regular_polygon(args.sides)
    return mf.segment((0.0, 0.0), (1.0, 0.0))


def cmd_curve(args) -> int:
    from . import manifolds as mf

    curve = _curve(args)
    rectifiable, _ = mf.is_linear_rectifiable(curve)
    complexity, cover = mf.rl_complexity_polyline(curve)
    covered, fraction = mf.direction_coverage(curve)
    result = {"kind": args.kind, "n_vertices": len(curve.vertices),
              "rectifiable": bool(rectifiable), "rl_complexity": complexity,
              "coverage": {"all_directions": covered, "fraction": fraction}}
    if args.arch is not None:
        result["verdict"] = mf.verdict_report(args.arch, curve)
    if args.csv:
        mf.write_points_csv(args.csv, curve.vertices)
    _emit(args, result, args._start)
    return EXIT_OK


def _training_data(data_cfg: dict, seed: int) -> np.ndarray:
    from . import manifolds as mf

    kind = data_cfg.get("kind", "spiral")
    if kind == "spiral":
        keys = ("a", "b", "w", "T", "n_samples")
        return mf.spiral(**{k: data_cfg[k] for k in keys if k in data_cfg}).vertices
    if kind == "height_field":
        mesh = mf.height_field_mesh(data_cfg.get("n_side", 40), data_cfg.get("amplitude", 0.3))
        return mesh.sample_surface(data_cfg.get("n_samples", 2000), seed).points
    if kind == "csv":
        return mf.read_points_csv(data_cfg["path"])
    if kind == "off":
        return mf.load_off(data_cfg["path"]).points
    raise UsageError(f"unknown data kind {kind!r}")


def cmd_train_ae(args) -> int:
    from .autoencoder import ReluAutoencoder
    from .manifolds import write_points_csv

    try:
        config = json.loads(Path(args.config).read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"{args.config}: invalid JSON ({exc})") from None
    seed = int(config.get("seed", args.seed))
    args.seed = seed
    X = _training_data(config.get("data", {}), seed)
    ae = ReluAutoencoder(
        encoder_widths=tuple(config.get("encoder", (X.shape[1], 32, 32, 32, 1))),
        decoder_widths=tuple(config["decoder"]) if config.get("decoder") else None,
        learning_rate=config.get("learning_rate", 1e-3), epochs=config.get("epochs", 100),
        batch_size=config.get("batch_size"), random_state=seed)
    ae.fit(X)
    out_dir = Path(args.model_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ae.save(out_dir / "model.json")
    write_points_csv(out_dir / "data.csv", X)
    report = ae.report_.to_dict()
    report["experiment"] = config
    _emit(args, report, args._start)
    return EXIT_OK


def cmd_ot(args) -> int:
    from .transport import SemiDiscreteOT, load_instance, power_diagram_svg

    sites, masses, domain = load_instance(args.instance)
    ot = SemiDiscreteOT(domain, tol=args.tol, max_iter=args.max_iter,
                        method=args.method).fit(sites, masses)
    if args.svg:
        power_diagram_svg(ot, args.svg)
    result = ot.result_dict()
    result["report"] = ot.report_.to_dict()
    _emit(args, result, args._start)
    return EXIT_OK if ot.report_.converged else EXIT_NONCONVERGED


def cmd_generate(args) -> int:
    from .autoencoder import ReluAutoencoder
    from .manifolds import read_points_csv, write_points_csv
    from .transport import ae_omt_generate

    ae = ReluAutoencoder.load(args.model)
    data = read_points_csv(args.data)
    cloud, idx, ot = ae_omt_generate(ae, args.n, seed=args.seed, data=data, tol=args.tol,
                                     return_sites=True)
    if args.csv:
        write_points_csv(args.csv, cloud.points)
    counts = np.bincount(idx, minlength=len(ot.sites_))
    _emit(args, {"n": args.n, "n_sites": len(ot.sites_), "site_counts": counts.tolist(),
                 "ot": ot.report_.to_dict()}, args._start)
    return EXIT_OK


# parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="relugeom", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"relugeom {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--out", help="result JSON path (default: stdout)")
        sp.add_argument("--seed", type=int, default=0)
        sp.set_defaults(func=func)
        return sp

    sp = add("bound", cmd_bound, "piece-count bound of an architecture")
    sp.add_argument("arch_pos", nargs="?", type=_arch, metavar="ARCH")
    sp.add_argument("--arch", type=_arch)
    sp.add_argument("--json", action="store_true", help="print the JSON result")

    sp = add("regions", cmd_regions, "linear regions of a network on a box")
    sp.add_argument("--model", help="network or autoencoder JSON (encoder is used)")
    sp.add_argument("--arch", type=_arch, help="random network of this shape (uses --seed)")
    sp.add_argument("--box", type=_box)
    sp.add_argument("--mode", choices=("exact", "sampled"), default="exact")
    sp.add_argument("--resolution", type=int, default=512)
    sp.add_argument("--tol", type=_positive_float, default=1e-7)
    sp.add_argument("--svg")
    sp.add_argument("--csv")

    sp = add("curve", cmd_curve, "rectified linear complexity of a curve")
    sp.add_argument("kind", choices=("spiral", "peano", "segment", "polygon"))
    sp.add_argument("--a", type=_positive_float, default=1.0)
    sp.add_argument("--b", type=_positive_float, default=0.2)
    sp.add_argument("--w", type=_positive_float, default=1.0)
    sp.add_argument("--T", type=_positive_float, default=4 * np.pi)
    sp.add_argument("--n", type=int, default=2000)
    sp.add_argument("--order", type=int, default=3)
    sp.add_argument("--sides", type=int, default=8)
    sp.add_argument("--arch", type=_arch)
    sp.add_argument("--csv", help="write curve vertices as CSV")

    sp = add("train-ae", cmd_train_ae, "train an autoencoder from a JSON config")
    sp.add_argument("config")
    sp.add_argument("--model-dir", default=".", help="where model.json and data.csv go")

    sp = add("ot", cmd_ot, "solve a semi-discrete transport instance")
    sp.add_argument("instance")
    sp.add_argument("--tol", type=_positive_float, default=1e-6)
    sp.add_argument("--max-iter", type=int, default=1000)
    sp.add_argument("--method", choices=("newton", "gradient"), default="newton")
    sp.add_argument("--svg")

    sp = add("generate", cmd_generate, "sample an autoencoder through latent transport")
    sp.add_argument("--model", required=True)
    sp.add_argument("--data", required=True, help="training points CSV")
    sp.add_argument("--n", type=int, default=1000)
    sp.add_argument("--tol", type=_positive_float, default=1e-6)
    sp.add_argument("--csv")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with 2 on usage errors
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    args._start = time.perf_counter()
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"relugeom: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NotConvergedError, TrainingDivergedError) as exc:
        print(f"relugeom: not converged: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except (OSError, json.JSONDecodeError) as exc:
        print(f"relugeom: i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError) as exc:
        print(f"relugeom: invalid input: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
