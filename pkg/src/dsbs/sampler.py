"""Euler-Maruyama integration of the bridge SDE from a fixed start point.

Every particle draws its Gaussian increments from its own counter-based
Philox stream keyed by ``(seed, particle_index)``, and the drift kernel
treats rows independently, so a particle's trajectory is bitwise identical
whether it is simulated alone, inside a batch, or on any number of workers.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .drift import DriftEvaluator
from .errors import InvalidArgument, NumericFailure
from .sde import TimeGrid, base_drift, diffusion_coeff

# Particles per unit of work handed to a worker. Fixed so that the partition
# of particles never depends on the worker count.
TASK_SIZE = 256


@dataclass(frozen=True, eq=False)
class SamplerConfig:
    grid: TimeGrid
    particles: int = 10_000
    seed: int = 0
    start: np.ndarray | None = None  # None: use the evaluator's start point
    record_trajectories: bool = False
    record_stride: int = 1

    def __post_init__(self):
        if not isinstance(self.grid, TimeGrid):
            raise InvalidArgument("grid must be a TimeGrid")
        if self.particles < 1:
            raise InvalidArgument(f"need at least one particle, got {self.particles}")
        if not 0 <= self.seed < 2**64:
            raise InvalidArgument("seed must be a 64-bit unsigned integer")
        if self.record_stride < 1:
            raise InvalidArgument("record_stride must be positive")

    def recorded_steps(self) -> np.ndarray:
        """Grid indices kept in a trajectory: every stride-th node plus the last."""
        n = self.grid.n_steps
        idx = np.arange(0, n + 1, self.record_stride)
        if idx[-1] != n:
            idx = np.append(idx, n)
        return idx

    def describe(self) -> dict:
        return {
            "n_steps": self.grid.n_steps,
            "grid": "uniform" if np.array_equal(self.grid.nodes, TimeGrid.uniform(self.grid.n_steps).nodes) else self.grid.nodes.tolist(),
            "particles": self.particles,
            "seed": self.seed,
            "start": None if self.start is None else np.asarray(self.start).tolist(),
            "record_trajectories": self.record_trajectories,
            "record_stride": self.record_stride,
        }


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (len(times), d)

    def __post_init__(self):
        if len(self.times) != len(self.states):
            raise InvalidArgument("times and states must have equal length")


@dataclass(frozen=True, eq=False)
class SampleBatch:
    terminal: np.ndarray  # (P, d)
    config_echo: SamplerConfig
    wallclock: float
    times: np.ndarray | None = field(default=None, repr=False)
    trajectories: np.ndarray | None = field(default=None, repr=False)  # (P, len(times), d)

    def trajectory(self, particle: int) -> Trajectory:
        if self.trajectories is None:
            raise InvalidArgument("batch was run without trajectory recording")
        return Trajectory(self.times, self.trajectories[particle])


def particle_rng(seed: int, particle_index: int) -> np.random.Generator:
    """Independent Philox stream for one particle."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(particle_index),))
    return np.random.Generator(np.random.Philox(ss))


def em_step(ev: DriftEvaluator, x, t: float, dt: float, noise) -> np.ndarray:
    """One Euler-Maruyama step for a single point or a (B, d) stack of points."""
    x = np.asarray(x, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    if noise.shape != x.shape:
        raise InvalidArgument(f"noise shape {noise.shape} != state shape {x.shape}")
    if t + dt > 1.0 + 1e-12:
        raise InvalidArgument(f"step overruns t=1 (t={t}, dt={dt})")
    X = np.atleast_2d(x)
    drift = base_drift(ev.sde, X, t) + ev.drift_batch(X, t)
    out = X + dt * drift + (diffusion_coeff(ev.sde, t) * math.sqrt(dt)) * np.atleast_2d(noise)
    if not np.all(np.isfinite(out)):
        bad = int(np.flatnonzero(~np.all(np.isfinite(out), axis=1))[0])
        raise NumericFailure(f"non-finite state for row {bad} at t={t}", particle=bad)
    return out if x.ndim == 2 else out[0]


def _resolve_start(ev: DriftEvaluator, cfg: SamplerConfig) -> np.ndarray:
    if cfg.start is None:
        return ev.start
    start = np.asarray(cfg.start, dtype=np.float64)
    if not np.array_equal(start, ev.start):
        raise InvalidArgument("sampler start point differs from the drift evaluator's start point")
    return start


def _run_particles(ev: DriftEvaluator, cfg: SamplerConfig, indices: np.ndarray):
    """Integrate the given particles over the whole grid.

    Returns (terminal states, recorded states or None).
    """
    start = _resolve_start(ev, cfg)
    nodes, steps = cfg.grid.nodes, cfg.grid.steps
    d = ev.sde.dim
    r = len(indices)
    gens = [particle_rng(cfg.seed, i) for i in indices]
    X = np.tile(start, (r, 1))
    eps = np.empty((r, d))
    rec_idx = cfg.recorded_steps() if cfg.record_trajectories else None
    rec = None
    if rec_idx is not None:
        rec = np.empty((r, len(rec_idx), d))
        rec[:, 0] = X
        slot = 1
    for j in range(cfg.grid.n_steps):
        for row, g in enumerate(gens):
            g.standard_normal(out=eps[row])
        try:
            X = em_step(ev, X, nodes[j], steps[j], eps)
        except NumericFailure as exc:
            p = int(indices[exc.particle])
            raise NumericFailure(f"particle {p} became non-finite at step {j} (t={nodes[j]})", p, j) from None
        if rec is not None and slot < len(rec_idx) and rec_idx[slot] == j + 1:
            rec[:, slot] = X
            slot += 1
    return X, rec


def sample_path(ev: DriftEvaluator, cfg: SamplerConfig, particle_index: int) -> Trajectory:
    if not 0 <= particle_index < cfg.particles:
        raise InvalidArgument(f"particle index {particle_index} outside [0, {cfg.particles})")
    rec_cfg = cfg if cfg.record_trajectories else _with_recording(cfg)
    _, rec = _run_particles(ev, rec_cfg, np.array([particle_index]))
    return Trajectory(cfg.grid.nodes[rec_cfg.recorded_steps()], rec[0])


def _with_recording(cfg: SamplerConfig) -> SamplerConfig:
    return SamplerConfig(cfg.grid, cfg.particles, cfg.seed, cfg.start, True, cfg.record_stride)


def sample_batch(ev: DriftEvaluator, cfg: SamplerConfig, workers: int = 1) -> SampleBatch:
    """Run all ``cfg.particles`` particles; the result does not depend on ``workers``."""
    if workers < 1:
        raise InvalidArgument("workers must be positive")
    t0 = time.perf_counter()
    chunks = [np.arange(lo, min(lo + TASK_SIZE, cfg.particles)) for lo in range(0, cfg.particles, TASK_SIZE)]

    def run(idx):
        try:
            return _run_particles(ev, cfg, idx)
        except NumericFailure as exc:
            return exc

    if workers == 1:
        results = [run(c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, chunks))

    failures = [r for r in results if isinstance(r, NumericFailure)]
    if failures:
        first = failures[0]
        msg = "; ".join(str(f) for f in failures)
        err = NumericFailure(f"{len(failures)} particle block(s) failed: {msg}", first.particle, first.step)
        err.failures = failures
        raise err

    terminal = np.concatenate([r[0] for r in results])
    times = trajs = None
    if cfg.record_trajectories:
        times = cfg.grid.nodes[cfg.recorded_steps()]
        trajs = np.concatenate([r[1] for r in results])
    return SampleBatch(terminal, cfg, time.perf_counter() - t0, times, trajs)
