"""Reference SDE families (VE, VP, sub-VP), their schedules and Gaussian kernels.

All three families are linear in ``x`` with isotropic noise, so every
transition law is ``Normal(m * x_s, v * I)`` for scalars ``(m, v)`` that
depend only on the two times.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import ClassVar, Union

import numpy as np

from .errors import InvalidArgument

# Smallest variance ever used as a divisor.
VARIANCE_FLOOR = 1e-300


class Family(str, enum.Enum):
    VE = "ve"
    VP = "vp"
    SUBVP = "subvp"


def _check_time(t: float, name: str = "t") -> float:
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise InvalidArgument(f"{name}={t!r} outside [0, 1]")
    return t


def _check_interval(s: float, t: float) -> tuple[float, float]:
    s, t = _check_time(s, "s"), _check_time(t, "t")
    if s > t:
        raise InvalidArgument(f"need s <= t, got s={s!r} > t={t!r}")
    return s, t


# ---------------------------------------------------------------------------
# Schedules
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LinearAlpha:
    """alpha(t) = t: the reference process is standard Brownian motion."""

    kind: ClassVar[str] = "ve_alpha"

    def alpha(self, t: float) -> float:
        return t

    def alpha_prime(self, t: float) -> float:
        return 1.0


@dataclass(frozen=True)
class GeometricSmld:
    """alpha(t) = sigma_min^2 (sigma_max / sigma_min)^(2t)."""

    sigma_min: float = 0.01
    sigma_max: float = 50.0
    kind: ClassVar[str] = "ve_alpha"

    def __post_init__(self):
        if not (self.sigma_max > self.sigma_min > 0):
            raise InvalidArgument(
                f"GeometricSmld needs sigma_max > sigma_min > 0, got {self.sigma_min}, {self.sigma_max}"
            )

    @property
    def log_ratio(self) -> float:
        return math.log(self.sigma_max / self.sigma_min)

    def alpha(self, t: float) -> float:
        return self.sigma_min**2 * math.exp(2.0 * t * self.log_ratio)

    def alpha_prime(self, t: float) -> float:
        return 2.0 * self.log_ratio * self.alpha(t)


@dataclass(frozen=True)
class ExpDecayBeta:
    """beta(t) = tau * exp(-tau t)."""

    tau: float = 1.0
    kind: ClassVar[str] = "vp_beta"

    def __post_init__(self):
        if not self.tau > 0:
            raise InvalidArgument(f"tau must be positive, got {self.tau}")

    def beta(self, t: float) -> float:
        return self.tau * math.exp(-self.tau * t)

    def integral(self, s: float, t: float) -> float:
        # exp(-tau s) - exp(-tau t), written to keep relative accuracy for t ~ s
        return -math.exp(-self.tau * s) * math.expm1(-self.tau * (t - s))


@dataclass(frozen=True)
class LinearDdpmBeta:
    """beta(t) = beta_min + t (beta_max - beta_min)."""

    beta_min: float = 0.1
    beta_max: float = 20.0
    kind: ClassVar[str] = "vp_beta"

    def __post_init__(self):
        if not (self.beta_max >= self.beta_min > 0):
            raise InvalidArgument(
                f"LinearDdpmBeta needs beta_max >= beta_min > 0, got {self.beta_min}, {self.beta_max}"
            )

    def beta(self, t: float) -> float:
        return self.beta_min + t * (self.beta_max - self.beta_min)

    def integral(self, s: float, t: float) -> float:
        return (t - s) * (self.beta_min + 0.5 * (self.beta_max - self.beta_min) * (t + s))


Schedule = Union[LinearAlpha, GeometricSmld, ExpDecayBeta, LinearDdpmBeta]


@dataclass(frozen=True)
class ReferenceSde:
    family: Family
    schedule: Schedule
    dim: int
    # sub-VP only: use the exact conditional variance instead of the squared VP form
    subvp_exact_variance: bool = False

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if int(self.dim) != self.dim or self.dim < 1:
            raise InvalidArgument(f"dim must be a positive integer, got {self.dim!r}")
        expected = "ve_alpha" if self.family is Family.VE else "vp_beta"
        if self.schedule.kind != expected:
            raise InvalidArgument(
                f"{self.family.value} SDE needs a {expected} schedule, got {type(self.schedule).__name__}"
            )

    @classmethod
    def ve(cls, dim: int, schedule: Schedule | None = None) -> "ReferenceSde":
        return cls(Family.VE, schedule or LinearAlpha(), dim)

    @classmethod
    def vp(cls, dim: int, tau: float = 1.0) -> "ReferenceSde":
        return cls(Family.VP, ExpDecayBeta(tau), dim)

    @classmethod
    def subvp(cls, dim: int, tau: float = 1.0, exact_variance: bool = False) -> "ReferenceSde":
        return cls(Family.SUBVP, ExpDecayBeta(tau), dim, exact_variance)

    def describe(self) -> dict:
        sched = {"type": type(self.schedule).__name__}
        sched.update({k: getattr(self.schedule, k) for k in self.schedule.__dataclass_fields__})
        return {
            "family": self.family.value,
            "schedule": sched,
            "dim": self.dim,
            "subvp_exact_variance": self.subvp_exact_variance,
        }


@dataclass(frozen=True)
class KernelParams:
    """q(s, x_s, t, .) = Normal(mean_scale * x_s, variance * I)."""

    mean_scale: float
    variance: float


# ---------------------------------------------------------------------------
# Coefficients and kernels
# ---------------------------------------------------------------------------


def base_drift(sde: ReferenceSde, x, t: float) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != sde.dim:
        raise InvalidArgument(f"point has dimension {x.shape[-1]}, SDE has {sde.dim}")
    t = _check_time(t)
    if sde.family is Family.VE:
        return np.zeros_like(x)
    return -0.5 * sde.schedule.beta(t) * x


def diffusion_sq(sde: ReferenceSde, t: float) -> float:
    """sigma(t)^2, the quantity the drift formulas actually use."""
    t = _check_time(t)
    if sde.family is Family.VE:
        return sde.schedule.alpha_prime(t)
    beta = sde.schedule.beta(t)
    if sde.family is Family.VP:
        return beta
    return beta * -math.expm1(-2.0 * sde.schedule.integral(0.0, t))


def diffusion_coeff(sde: ReferenceSde, t: float) -> float:
    return math.sqrt(diffusion_sq(sde, t))


def beta_integral(sde: ReferenceSde, s: float, t: float) -> float:
    if sde.family is Family.VE:
        raise InvalidArgument("beta_integral is defined only for VP and sub-VP SDEs")
    s, t = _check_interval(s, t)
    if s == t:
        return 0.0
    return sde.schedule.integral(s, t)


def transition_params(sde: ReferenceSde, s: float, t: float) -> KernelParams:
    s, t = _check_interval(s, t)
    if s == t:
        return KernelParams(1.0, 0.0)
    if sde.family is Family.VE:
        sched = sde.schedule
        return KernelParams(1.0, sched.alpha(t) - sched.alpha(s))
    b = beta_integral(sde, s, t)
    mean_scale = math.exp(-0.5 * b)
    one_minus = -math.expm1(-b)
    if sde.family is Family.VP:
        return KernelParams(mean_scale, one_minus)
    if sde.subvp_exact_variance:
        # 1 + e^{-2A(t)} - e^{-(A(t)-A(s))} - e^{-(A(t)+A(s))}, factored
        a_sum = sde.schedule.integral(0.0, s) + sde.schedule.integral(0.0, t)
        return KernelParams(mean_scale, one_minus * -math.expm1(-a_sum))
    return KernelParams(mean_scale, one_minus**2)


# ---------------------------------------------------------------------------
# Diffusion-coefficient profiles for schedule comparison
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProfileScheme:
    """A named diffusion-coefficient curve: ve-dsbs, vp-dsbs-<tau>, subvp-dsbs-<tau>, smld, ddpm."""

    kind: str
    tau: float = 1.0
    sigma_min: float = 0.01
    sigma_max: float = 50.0
    beta_min: float = 0.1
    beta_max: float = 20.0
    _kinds: ClassVar[tuple] = ("ve-dsbs", "vp-dsbs", "subvp-dsbs", "smld", "ddpm")

    def __post_init__(self):
        if self.kind not in self._kinds:
            raise InvalidArgument(f"unknown profile scheme {self.kind!r}")
        if self.kind in ("vp-dsbs", "subvp-dsbs") and not self.tau > 0:
            raise InvalidArgument(f"tau must be positive, got {self.tau}")
        if self.kind == "smld" and not self.sigma_max > self.sigma_min > 0:
            raise InvalidArgument("smld needs sigma_max > sigma_min > 0")
        if self.kind == "ddpm" and not self.beta_max >= self.beta_min > 0:
            raise InvalidArgument("ddpm needs beta_max >= beta_min > 0")

    @classmethod
    def parse(cls, label: str) -> "ProfileScheme":
        label = label.strip().lower()
        for kind in ("vp-dsbs", "subvp-dsbs"):
            if label.startswith(kind + "-"):
                try:
                    tau = float(label[len(kind) + 1 :])
                except ValueError:
                    raise InvalidArgument(f"bad tau in scheme label {label!r}") from None
                return cls(kind, tau=tau)
        return cls(label)

    @property
    def label(self) -> str:
        if self.kind in ("vp-dsbs", "subvp-dsbs"):
            return f"{self.kind}-{self.tau:g}"
        return self.kind


def sigma_profile(scheme: ProfileScheme | str, t: float) -> float:
    if isinstance(scheme, str):
        scheme = ProfileScheme.parse(scheme)
    t = _check_time(t)
    if scheme.kind == "ve-dsbs":
        return 1.0
    if scheme.kind == "vp-dsbs":
        return diffusion_coeff(ReferenceSde.vp(1, scheme.tau), t)
    if scheme.kind == "subvp-dsbs":
        return diffusion_coeff(ReferenceSde.subvp(1, scheme.tau), t)
    if scheme.kind == "smld":
        r = scheme.sigma_max / scheme.sigma_min
        return scheme.sigma_min * r**t * math.sqrt(2.0 * math.log(r))
    return math.sqrt(scheme.beta_min + t * (scheme.beta_max - scheme.beta_min))


# ---------------------------------------------------------------------------
# Time grid
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TimeGrid:
    nodes: np.ndarray = field(repr=False)

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=np.float64)
        if nodes.ndim != 1 or nodes.size < 2:
            raise InvalidArgument("time grid needs at least two nodes")
        if nodes[0] != 0.0 or nodes[-1] != 1.0:
            raise InvalidArgument("time grid must start at exactly 0 and end at exactly 1")
        if not np.all(np.diff(nodes) > 0):
            raise InvalidArgument("time grid must be strictly increasing")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def uniform(cls, n_steps: int) -> "TimeGrid":
        if n_steps < 1:
            raise InvalidArgument(f"need at least one step, got {n_steps}")
        return cls(np.arange(n_steps + 1, dtype=np.float64) / n_steps)

    @property
    def n_steps(self) -> int:
        return self.nodes.size - 1

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.nodes)

    def __repr__(self):
        return f"TimeGrid(n_steps={self.n_steps})"
