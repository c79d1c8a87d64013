"""Sample-quality metrics: exact and entropic 2-Wasserstein, energy distance, diagnostics."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from .errors import InvalidArgument

EXACT_SIZE_CAP = 4096


def _cloud(x) -> np.ndarray:
    x = np.asarray(getattr(x, "points", x), dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] == 0:
        raise InvalidArgument("point clouds must be nonempty 2-D arrays")
    return x


def sq_cost(A, B) -> np.ndarray:
    return cdist(_cloud(A), _cloud(B), "sqeuclidean")


def assignment_cost(C: np.ndarray, cols: np.ndarray) -> float:
    """Exactly rounded total cost of the assignment row i -> cols[i]."""
    return math.fsum(C[np.arange(len(cols)), cols])


def w2_exact(A, B, cap: int = EXACT_SIZE_CAP) -> float:
    """Empirical W2 between two equal-size uniform clouds via optimal assignment."""
    A, B = _cloud(A), _cloud(B)
    if A.shape != B.shape:
        raise InvalidArgument(f"clouds must have equal size and dimension, got {A.shape} and {B.shape}")
    if A.shape[0] > cap:
        raise InvalidArgument(
            f"{A.shape[0]} points exceeds the exact-solver cap of {cap}; "
            "use w2_subsampled or w2_entropic instead"
        )
    C = sq_cost(A, B)
    rows, cols = linear_sum_assignment(C)
    return math.sqrt(assignment_cost(C, cols) / A.shape[0])


def w2_subsampled(A, B, m: int = 2000, reps: int = 5, seed: int = 0):
    """Mean exact W2 over ``reps`` disjoint size-``m`` subsamples of each cloud.

    Returns ``(mean, per-repetition values)``.
    """
    A, B = _cloud(A), _cloud(B)
    if m < 1 or reps < 1:
        raise InvalidArgument("subsample size and repetitions must be positive")
    if reps * m > min(len(A), len(B)):
        raise InvalidArgument(f"{reps} disjoint subsamples of {m} need {reps * m} points per cloud")
    rng = np.random.default_rng(seed)
    pa, pb = rng.permutation(len(A)), rng.permutation(len(B))
    values = [w2_exact(A[pa[r * m : (r + 1) * m]], B[pb[r * m : (r + 1) * m]]) for r in range(reps)]
    return float(np.mean(values)), values


@dataclass
class SinkhornInfo:
    iterations: int
    converged: bool
    marginal_error: float
    eps: float


def _lse_rows(M: np.ndarray) -> np.ndarray:
    mx = M.max(axis=1)
    return mx + np.log(np.exp(M - mx[:, None]).sum(axis=1))


def _sinkhorn_sweeps(K, f, g, eps, log_a, log_b, n_iter, tol):
    """Alternating log-domain updates at fixed eps; K = -C (not yet divided by eps)."""
    Ke = K / eps
    KeT = np.ascontiguousarray(Ke.T)
    err = math.inf
    it = 0
    for it in range(1, n_iter + 1):
        f = -eps * _lse_rows(Ke + (g / eps + log_b)[None, :])
        g = -eps * _lse_rows(KeT + (f / eps + log_a)[None, :])
        if tol is not None and (it % 10 == 0 or it == n_iter):
            # columns are exact after the g-update; measure the row marginal
            rows = np.exp(_lse_rows(Ke + (g / eps + log_b)[None, :]) + f / eps + log_a)
            err = float(np.abs(rows - np.exp(log_a)).sum())
            if err < tol:
                break
    return f, g, it, err


def sinkhorn_plan(A, B, eps: float, max_iter: int = 10_000, tol: float = 1e-4, scaling: float = 0.5):
    """Log-domain Sinkhorn on squared Euclidean cost with uniform marginals.

    The regularization is annealed geometrically (factor ``scaling``) from the
    cost scale down to ``eps``, warm-starting the potentials; iterations
    spent annealing do not count against ``max_iter``. ``tol`` bounds the L1
    error of the row marginal.

    Returns ``(plan, cost matrix, SinkhornInfo)``.
    """
    if not eps > 0:
        raise InvalidArgument("eps must be positive")
    if not 0 < scaling < 1:
        raise InvalidArgument("scaling must lie in (0, 1)")
    C = sq_cost(A, B)
    na, nb = C.shape
    log_a = np.full(na, -math.log(na))
    log_b = np.full(nb, -math.log(nb))
    f = np.zeros(na)
    g = np.zeros(nb)
    K = -C
    e = max(float(C.max()), eps)
    while e > eps:
        f, g, _, _ = _sinkhorn_sweeps(K, f, g, e, log_a, log_b, 10, None)
        e = max(e * scaling, eps)
    f, g, it, err = _sinkhorn_sweeps(K, f, g, eps, log_a, log_b, max_iter, tol)
    log_p = K / eps + (f / eps + log_a)[:, None] + (g / eps + log_b)[None, :]
    plan = np.exp(log_p)
    return plan, C, SinkhornInfo(it, err < tol, err, eps)


def w2_entropic(A, B, eps: float, max_iter: int = 10_000, tol: float = 1e-4, return_info: bool = False):
    """sqrt of the transport cost under the entropic plan; biased upward for eps > 0."""
    plan, C, info = sinkhorn_plan(A, B, eps, max_iter, tol)
    if not info.converged:
        warnings.warn(
            f"Sinkhorn did not reach tol={tol} in {max_iter} iterations (marginal error {info.marginal_error:.3g})",
            RuntimeWarning,
        )
    value = math.sqrt(max(float(np.sum(plan * C)), 0.0))
    return (value, info) if return_info else value


def median_cost(A, B) -> float:
    return float(np.median(sq_cost(A, B)))


def _mean_pair_distance(A, B, chunk: int = 1024) -> float:
    total = 0.0
    for lo in range(0, len(A), chunk):
        total += cdist(A[lo : lo + chunk], B).sum()
    return total / (len(A) * len(B))


def energy_distance(A, B) -> float:
    """V-statistic 2 E|a-b| - E|a-a'| - E|b-b'|."""
    A, B = _cloud(A), _cloud(B)
    value = 2.0 * _mean_pair_distance(A, B) - _mean_pair_distance(A, A) - _mean_pair_distance(B, B)
    return max(value, 0.0)


def mode_coverage(samples, centers) -> np.ndarray:
    """Fraction of samples whose nearest center is each of ``centers``."""
    samples, centers = _cloud(samples), _cloud(centers)
    nearest = cdist(samples, centers, "sqeuclidean").argmin(axis=1)
    return np.bincount(nearest, minlength=len(centers)) / len(samples)


def drift_error_report(ev, oracle, probes) -> dict:
    """Compare ``ev.empirical_drift`` with ``oracle(x, t)`` over probe points ``(x, t)``."""
    probes = list(probes)
    if not probes:
        raise InvalidArgument("probe grid is empty")
    rel, ab = [], []
    for x, t in probes:
        if not t < 1:
            raise InvalidArgument(f"probe time {t} must be < 1")
        est = ev.empirical_drift(x, t)
        ref = np.asarray(oracle(x, t), dtype=np.float64)
        err = float(np.linalg.norm(est - ref))
        scale = float(np.linalg.norm(ref))
        ab.append(err)
        rel.append(err / scale if scale > 0 else (0.0 if err == 0 else math.inf))
    return {
        "max_rel_error": max(rel),
        "mean_rel_error": float(np.mean(rel)),
        "max_abs_error": max(ab),
        "n_probes": len(probes),
    }


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@dataclass
class MetricProtocol:
    """How W2 is computed: ``exact``, ``subsampled`` (m x reps) or ``entropic``."""

    kind: str = "subsampled"
    m: int = 2000
    reps: int = 5
    eps: float | None = None  # absolute; None means eps_rel * median cost
    eps_rel: float = 0.01
    max_iter: int = 10_000
    seed: int = 0
    spec: str = ""  # the protocol string as given by the user

    def __post_init__(self):
        if self.kind not in ("exact", "subsampled", "entropic"):
            raise InvalidArgument(f"unknown W2 protocol {self.kind!r}")

    @classmethod
    def parse_subsample(cls, text: str, seed: int = 0) -> "MetricProtocol":
        try:
            m, reps = text.lower().split("x")
            return cls("subsampled", m=int(m), reps=int(reps), seed=seed, spec=text)
        except ValueError:
            raise InvalidArgument(f"subsample protocol must look like 2000x5, got {text!r}") from None

    def describe(self) -> dict:
        if self.kind == "exact":
            return {"name": "exact"}
        if self.kind == "subsampled":
            return {"name": "subsampled", "m": self.m, "repetitions": self.reps, "seed": self.seed}
        return {"name": "entropic", "eps": self.eps, "eps_rel": self.eps_rel, "max_iter": self.max_iter}


@dataclass
class MetricReport:
    w2: float
    method: dict
    auxiliary: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def to_json(self, **kw) -> str:
        return json.dumps(asdict(self), sort_keys=True, **kw)

    @classmethod
    def from_json(cls, text: str) -> "MetricReport":
        d = json.loads(text)
        return cls(d["w2"], d["method"], d.get("auxiliary", {}), d.get("meta", {}))


def evaluate(samples, test, protocol: MetricProtocol | None = None, centers=None, energy: bool = True) -> MetricReport:
    """W2 between generated and test clouds under ``protocol`` plus auxiliary scalars."""
    protocol = protocol or MetricProtocol()
    A, B = _cloud(samples), _cloud(test)
    meta = {"n_samples": len(A), "n_test": len(B), "warnings": []}
    if protocol.spec:
        meta["protocol"] = protocol.spec
    if protocol.kind == "exact":
        w2 = w2_exact(A, B)
    elif protocol.kind == "subsampled":
        w2, values = w2_subsampled(A, B, protocol.m, protocol.reps, protocol.seed)
        meta["w2_repetitions"] = values
    else:
        eps = protocol.eps if protocol.eps is not None else protocol.eps_rel * median_cost(A, B)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            w2, info = w2_entropic(A, B, eps, protocol.max_iter, return_info=True)
        meta["sinkhorn"] = asdict(info)
        meta["warnings"].extend(str(w.message) for w in caught)
    aux = {}
    if energy:
        aux["energy_distance"] = energy_distance(A, B)
    if centers is not None:
        aux["mode_coverage"] = mode_coverage(A, centers).tolist()
    return MetricReport(float(w2), protocol.describe(), aux, meta)
