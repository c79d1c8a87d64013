"""Command-line driver: generate | sample | evaluate | replicate | schedule-profile.

Every subcommand accepts ``--config FILE`` (TOML, or a JSON manifest written
by an earlier run); explicit flags override values from the file.

Exit codes: 0 success, 2 usage or invalid argument, 3 I/O or file format,
4 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .datasets import DatasetSpec, eight_gaussian_centers, load_dataset, save_dataset
from .drift import DriftEvaluator
from .errors import DatasetFormatError, InvalidArgument, NumericFailure
from .experiment import BENCHMARKS, SdeOptions, replicate, write_manifest
from .metrics import MetricProtocol, evaluate
from .sampler import SamplerConfig, sample_batch
from .sde import ProfileScheme, TimeGrid, sigma_profile

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4

DEFAULT_SCHEMES = "ve-dsbs,vp-dsbs-1,vp-dsbs-10,smld,ddpm"


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_sde_flags(p):
    g = p.add_argument_group("reference SDE")
    g.add_argument("--sde", choices=["ve", "vp", "subvp"], default="ve")
    g.add_argument("--tau", type=float, default=1.0, help="beta(t) = tau exp(-tau t)")
    g.add_argument("--alpha", choices=["linear", "smld"], default="linear", help="VE alpha(t) schedule")
    g.add_argument("--sigma-min", type=float, default=0.01)
    g.add_argument("--sigma-max", type=float, default=50.0)
    g.add_argument("--beta", choices=["exp", "ddpm"], default="exp", help="VP/sub-VP beta(t) schedule")
    g.add_argument("--beta-min", type=float, default=0.1)
    g.add_argument("--beta-max", type=float, default=20.0)
    g.add_argument("--subvp-exact-variance", action="store_true", help="exact sub-VP conditional variance")


def _sde_options(args) -> SdeOptions:
    return SdeOptions(
        args.sde,
        args.tau,
        args.alpha,
        args.sigma_min,
        args.sigma_max,
        args.beta,
        args.beta_min,
        args.beta_max,
        args.subvp_exact_variance,
    )


def _add_dataset_flags(p):
    p.add_argument("--noise", type=float, default=0.1, help="moons jitter std")
    p.add_argument("--radius", type=float, default=4.0, help="8-Gaussians center radius")
    p.add_argument("--component-std", type=float, default=0.5)
    p.add_argument("--global-scale", type=float, default=2**-0.5)


def _dataset_params(args, kind: str) -> dict:
    if kind == "moons":
        return {"noise_std": args.noise}
    return {"radius": args.radius, "component_std": args.component_std, "global_scale": args.global_scale}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dsbs", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"dsbs {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a benchmark dataset")
    p.add_argument("--config")
    p.add_argument("--kind", choices=list(BENCHMARKS), required=True)
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    _add_dataset_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=["csv", "f64le"])

    p = sub.add_parser("sample", help="run the bridge sampler on a dataset")
    p.add_argument("--config")
    p.add_argument("--data", required=True)
    _add_sde_flags(p)
    p.add_argument("--N", type=int, default=100, help="number of Euler-Maruyama steps")
    p.add_argument("--particles", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--start", help="comma-separated start point (default: origin)")
    p.add_argument("--subsample", type=int, help="use a fixed uniform subset of this many data rows")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=["csv", "f64le"])
    p.add_argument("--trajectories", help="also write strided trajectories (.npz)")
    p.add_argument("--record-stride", type=int, default=1)
    p.add_argument("--manifest", help="manifest path (default: <out>.manifest.json)")

    p = sub.add_parser("evaluate", help="W2 and auxiliary distances between two clouds")
    p.add_argument("--config")
    p.add_argument("--samples", required=True)
    p.add_argument("--test", required=True)
    proto = p.add_mutually_exclusive_group()
    proto.add_argument("--exact", action="store_true", help="exact W2 on the full clouds")
    proto.add_argument("--exact-subsample", metavar="MxR", help="mean exact W2 over R disjoint size-M subsamples")
    proto.add_argument("--entropic-eps", type=float, help="Sinkhorn with this absolute regularization")
    proto.add_argument("--entropic-eps-rel", type=float, help="Sinkhorn with eps = value * median cost")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--centers", choices=["eight-gaussians"], help="report nearest-center mode coverage")
    p.add_argument("--no-energy", action="store_true")
    p.add_argument("--out", help="report path (default: stdout)")

    p = sub.add_parser("replicate", help="repeat a 2-D benchmark and aggregate W2")
    p.add_argument("--config")
    p.add_argument("--benchmark", choices=list(BENCHMARKS), required=True)
    _add_sde_flags(p)
    _add_dataset_flags(p)
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--n-train", type=int, default=10_000)
    p.add_argument("--n-test", type=int, default=10_000)
    p.add_argument("--particles", type=int, default=10_000)
    p.add_argument("--N", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--exact-subsample", default="2000x5")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out-csv", help="append-free CSV with one Table-1 style row")
    p.add_argument("--manifest", help="manifest JSON path")
    p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("schedule-profile", help="diffusion coefficient curves as CSV")
    p.add_argument("--config")
    p.add_argument("--schemes", default=DEFAULT_SCHEMES)
    p.add_argument("--samples", type=int, default=101, help="points per curve on [0, 1]")
    p.add_argument("--out", help="CSV path (default: stdout)")
    return parser


def _load_config(path) -> dict:
    path = Path(path)
    if path.suffix.lower() == ".json":
        data = json.loads(path.read_text())
        data = data.get("config", data)
    else:
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib
        data = tomllib.loads(path.read_text())
    return {k.replace("-", "_"): v for k, v in data.items()}


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    command = next((a for a in argv if a in COMMANDS), None)
    if known.config and command:
        cfg = _load_config(known.config)
        subparser = parser._subparsers._group_actions[0].choices[command]
        dests = {a.dest for a in subparser._actions}
        unknown = set(cfg) - dests
        if unknown:
            raise UsageError(f"unknown keys in {known.config}: {sorted(unknown)}")
        for action in subparser._actions:
            if action.dest in cfg:
                action.required = False
        subparser.set_defaults(**cfg)
    return parser.parse_args(argv)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _config_snapshot(args) -> dict:
    skip = {"command", "config", "manifest", "quiet"}
    return {k: v for k, v in vars(args).items() if k not in skip}


def cmd_generate(args) -> int:
    spec = DatasetSpec(args.kind, args.n, args.seed, _dataset_params(args, args.kind))
    ds = spec.build()
    save_dataset(ds, args.out, args.format)
    print(json.dumps({"wrote": args.out, "n": ds.n, "d": ds.d, "spec": spec.describe()}, sort_keys=True))
    return EXIT_OK


def _parse_point(text, dim):
    if text is None:
        return None
    if isinstance(text, (list, tuple)):
        vals = [float(v) for v in text]
    else:
        vals = [float(v) for v in str(text).split(",")]
    if len(vals) != dim:
        raise InvalidArgument(f"start point has {len(vals)} coordinates, data has {dim}")
    return np.array(vals)


def cmd_sample(args) -> int:
    data = load_dataset(args.data)
    opts = _sde_options(args)
    sde = opts.build(data.d)
    start = _parse_point(args.start, data.d)
    ev = DriftEvaluator(sde, data, start, subsample=args.subsample)
    cfg = SamplerConfig(
        TimeGrid.uniform(args.N),
        args.particles,
        args.seed,
        start,
        record_trajectories=bool(args.trajectories),
        record_stride=args.record_stride,
    )
    batch = sample_batch(ev, cfg, workers=args.workers)
    save_dataset(batch.terminal, args.out, args.format)
    outputs = {"samples": args.out}
    if args.trajectories:
        np.savez(args.trajectories, times=batch.times, states=batch.trajectories)
        outputs["trajectories"] = args.trajectories
    manifest = {
        "command": "sample",
        "version": __version__,
        "config": _config_snapshot(args),
        "sde": sde.describe(),
        "sampler": cfg.describe(),
        "dataset": {"path": args.data, "n": data.n, "d": data.d},
        "outputs": outputs,
        "wallclock": batch.wallclock,
    }
    write_manifest(args.manifest or f"{args.out}.manifest.json", manifest)
    return EXIT_OK


def _protocol(args) -> MetricProtocol:
    if args.exact:
        return MetricProtocol("exact", seed=args.seed, spec="exact")
    if args.entropic_eps is not None:
        return MetricProtocol("entropic", eps=args.entropic_eps, seed=args.seed, spec=f"entropic-eps={args.entropic_eps}")
    if args.entropic_eps_rel is not None:
        return MetricProtocol(
            "entropic", eps_rel=args.entropic_eps_rel, seed=args.seed, spec=f"entropic-eps-rel={args.entropic_eps_rel}"
        )
    if args.exact_subsample:
        return MetricProtocol.parse_subsample(args.exact_subsample, seed=args.seed)
    return None


def cmd_evaluate(args) -> int:
    samples = load_dataset(args.samples).points
    test = load_dataset(args.test).points
    protocol = _protocol(args)
    if protocol is None:
        # exact when small enough, otherwise the default subsampled protocol
        if len(samples) == len(test) and len(samples) <= 4096:
            protocol = MetricProtocol("exact", seed=args.seed, spec="exact")
        else:
            protocol = MetricProtocol.parse_subsample("2000x5", seed=args.seed)
    centers = eight_gaussian_centers() if args.centers else None
    report = evaluate(samples, test, protocol, centers=centers, energy=not args.no_energy)
    report.meta.update({"samples": args.samples, "test": args.test})
    text = report.to_json(indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_replicate(args) -> int:
    def progress(res):
        if not args.quiet:
            print(f"rep {res.rep}: W2 = {res.w2:.4f} ({res.wallclock:.1f}s)", file=sys.stderr)

    result = replicate(
        args.benchmark,
        _sde_options(args),
        reps=args.reps,
        n_train=args.n_train,
        n_test=args.n_test,
        particles=args.particles,
        n_steps=args.N,
        seed=args.seed,
        subsample=args.exact_subsample,
        dataset_params=_dataset_params(args, args.benchmark),
        workers=args.workers,
        progress=progress,
    )
    row = result.table_row()
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(row), lineterminator="\n")
    writer.writeheader()
    writer.writerow(row)
    if args.out_csv:
        Path(args.out_csv).write_text(buf.getvalue())
    sys.stdout.write(buf.getvalue())
    if args.manifest:
        manifest = result.manifest()
        manifest["config"] = _config_snapshot(args)
        write_manifest(args.manifest, manifest)
    return EXIT_OK


def schedule_profile_rows(schemes, samples: int):
    if samples < 2:
        raise InvalidArgument("need at least two samples per curve")
    ts = np.linspace(0.0, 1.0, samples)
    rows = []
    for label in schemes:
        scheme = ProfileScheme.parse(label)
        rows.extend((scheme.label, float(t), sigma_profile(scheme, t)) for t in ts)
    return rows


def cmd_schedule_profile(args) -> int:
    schemes = args.schemes if isinstance(args.schemes, list) else args.schemes.split(",")
    rows = schedule_profile_rows(schemes, args.samples)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["scheme", "t", "sigma"])
    writer.writerows((s, repr(t), repr(v)) for s, t, v in rows)
    if args.out:
        Path(args.out).write_text(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "sample": cmd_sample,
    "evaluate": cmd_evaluate,
    "replicate": cmd_replicate,
    "schedule-profile": cmd_schedule_profile,
}


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except (UsageError, ValueError) as exc:
        print(f"dsbs: error: bad config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"dsbs: error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        return COMMANDS[args.command](args)
    except NumericFailure as exc:
        print(f"dsbs: numeric failure: {exc} (particle={exc.particle}, step={exc.step})", file=sys.stderr)
        return EXIT_NUMERIC
    except (DatasetFormatError, OSError) as exc:
        print(f"dsbs: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except InvalidArgument as exc:
        print(f"dsbs: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
