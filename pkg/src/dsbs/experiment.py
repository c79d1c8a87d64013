"""Table-1 style replication runs and their reproducibility manifests."""

from __future__ import annotations

import json
import math
import time
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .datasets import EIGHT_GAUSSIANS_DEFAULTS, MOONS_DEFAULTS, DatasetSpec, eight_gaussian_centers
from .drift import DriftEvaluator
from .errors import InvalidArgument
from .metrics import MetricProtocol, evaluate
from .sampler import SamplerConfig, sample_batch
from .sde import ExpDecayBeta, Family, GeometricSmld, LinearAlpha, LinearDdpmBeta, ReferenceSde, TimeGrid

BENCHMARKS = ("eight-gaussians", "moons")

# Values reported for the 2-D benchmarks: (mean, sd) of W2 over 10 runs.
PUBLISHED_W2 = {
    ("eight-gaussians", "VE-DSBS"): (0.267, 0.079),
    ("eight-gaussians", "VP-DSBS-1"): (0.316, 0.062),
    ("eight-gaussians", "VP-DSBS-10"): (0.293, 0.077),
    ("moons", "VE-DSBS"): (0.148, 0.026),
    ("moons", "VP-DSBS-1"): (0.185, 0.020),
    ("moons", "VP-DSBS-10"): (0.329, 0.036),
}


@dataclass
class SdeOptions:
    """Flag-level description of a reference SDE."""

    sde: str = "ve"
    tau: float = 1.0
    alpha: str = "linear"  # VE: linear | smld
    sigma_min: float = 0.01
    sigma_max: float = 50.0
    beta: str = "exp"  # VP / sub-VP: exp | ddpm
    beta_min: float = 0.1
    beta_max: float = 20.0
    subvp_exact_variance: bool = False

    def build(self, dim: int) -> ReferenceSde:
        family = Family(self.sde)
        if family is Family.VE:
            sched = LinearAlpha() if self.alpha == "linear" else GeometricSmld(self.sigma_min, self.sigma_max)
        elif self.beta == "exp":
            sched = ExpDecayBeta(self.tau)
        elif self.beta == "ddpm":
            sched = LinearDdpmBeta(self.beta_min, self.beta_max)
        else:
            raise InvalidArgument(f"unknown beta schedule {self.beta!r}")
        return ReferenceSde(family, sched, dim, self.subvp_exact_variance)

    @property
    def label(self) -> str:
        if self.sde == "ve":
            return "VE-DSBS" if self.alpha == "linear" else "VE-DSBS-SMLD"
        name = "VP-DSBS" if self.sde == "vp" else "SUBVP-DSBS"
        return f"{name}-{self.tau:g}" if self.beta == "exp" else f"{name}-DDPM"


def derive_seeds(base: int, rep: int, count: int = 4) -> list[int]:
    """Independent 64-bit seeds for one repetition."""
    state = np.random.SeedSequence([int(base), int(rep)]).generate_state(count, dtype=np.uint64)
    return [int(s) for s in state]


def benchmark_spec(benchmark: str, n: int, seed: int, params: dict | None = None) -> DatasetSpec:
    if benchmark not in BENCHMARKS:
        raise InvalidArgument(f"unknown benchmark {benchmark!r}; choose from {BENCHMARKS}")
    defaults = EIGHT_GAUSSIANS_DEFAULTS if benchmark == "eight-gaussians" else MOONS_DEFAULTS
    return DatasetSpec(benchmark, n, seed, {**defaults, **(params or {})})


@dataclass
class RepResult:
    rep: int
    train_seed: int
    test_seed: int
    sample_seed: int
    metric_seed: int
    w2: float
    w2_repetitions: list
    auxiliary: dict
    wallclock: float


@dataclass
class ReplicateResult:
    benchmark: str
    algorithm: str
    config: dict
    reps: list[RepResult] = field(default_factory=list)

    @property
    def values(self) -> np.ndarray:
        return np.array([r.w2 for r in self.reps])

    @property
    def mean(self) -> float:
        return float(self.values.mean())

    @property
    def sd(self) -> float:
        v = self.values
        return float(v.std(ddof=1)) if len(v) > 1 else 0.0

    def table_row(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "benchmark": self.benchmark,
            "w2_mean": f"{self.mean:.6f}",
            "w2_sd": f"{self.sd:.6f}",
            "reps": len(self.reps),
            "cell": f"{self.mean:.3f} ({self.sd:.3f})",
        }

    def manifest(self) -> dict:
        return {
            "command": "replicate",
            "version": __version__,
            "config": self.config,
            "benchmark": self.benchmark,
            "algorithm": self.algorithm,
            "repetitions": [asdict(r) for r in self.reps],
            "aggregate": {"mean": self.mean, "sd": self.sd, "reps": len(self.reps)},
            "wallclock": sum(r.wallclock for r in self.reps),
        }


def replicate(
    benchmark: str,
    sde: SdeOptions | None = None,
    reps: int = 10,
    n_train: int = 10_000,
    n_test: int = 10_000,
    particles: int = 10_000,
    n_steps: int = 100,
    seed: int = 0,
    subsample: str = "2000x5",
    dataset_params: dict | None = None,
    workers: int = 1,
    progress=None,
) -> ReplicateResult:
    """Fresh train/test sets, a sampling run and a W2 evaluation per repetition."""
    sde = sde or SdeOptions()
    if reps < 1:
        raise InvalidArgument("reps must be positive")
    if reps == 1:
        warnings.warn("a single repetition reports sd = 0", RuntimeWarning)
    config = {
        "benchmark": benchmark,
        **asdict(sde),
        "reps": reps,
        "n_train": n_train,
        "n_test": n_test,
        "particles": particles,
        "N": n_steps,
        "seed": seed,
        "exact_subsample": subsample,
        "dataset_params": benchmark_spec(benchmark, 1, 0, dataset_params).params,
        "start": None,
    }
    result = ReplicateResult(benchmark, sde.label, config)
    grid = TimeGrid.uniform(n_steps)
    centers = None
    if benchmark == "eight-gaussians":
        p = config["dataset_params"]
        centers = eight_gaussian_centers(p["radius"], p["global_scale"])
    for rep in range(reps):
        t0 = time.perf_counter()
        train_seed, test_seed, sample_seed, metric_seed = derive_seeds(seed, rep)
        train = benchmark_spec(benchmark, n_train, train_seed, dataset_params).build()
        test = benchmark_spec(benchmark, n_test, test_seed, dataset_params).build()
        ev = DriftEvaluator(sde.build(train.d), train)
        batch = sample_batch(ev, SamplerConfig(grid, particles, sample_seed), workers=workers)
        protocol = MetricProtocol.parse_subsample(subsample, seed=metric_seed)
        report = evaluate(batch.terminal, test.points, protocol, centers=centers, energy=False)
        res = RepResult(
            rep,
            train_seed,
            test_seed,
            sample_seed,
            metric_seed,
            report.w2,
            report.meta.get("w2_repetitions", []),
            report.auxiliary,
            time.perf_counter() - t0,
        )
        result.reps.append(res)
        if progress:
            progress(res)
    return result


def write_manifest(path, manifest: dict) -> None:
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, float) and not math.isfinite(o):
        return str(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")
