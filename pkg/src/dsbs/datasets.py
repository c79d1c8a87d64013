"""Benchmark point clouds and the two on-disk dataset formats.

Formats
-------
csv
    First line ``dim=<d>``, then one comma-separated row per point written
    with ``repr`` so values round-trip exactly.
f64le
    16-byte header of two little-endian uint64 ``(n, d)`` followed by ``n*d``
    little-endian float64 values in row-major order.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .drift import Dataset, GaussianMixture
from .errors import DatasetFormatError, InvalidArgument

_HEADER = struct.Struct("<QQ")

EIGHT_GAUSSIANS_DEFAULTS = {"radius": 4.0, "component_std": 0.5, "global_scale": 1.0 / math.sqrt(2.0)}
MOONS_DEFAULTS = {"noise_std": 0.1}


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(int(seed))


def make_moons(n: int, noise_std: float = 0.1, seed: int = 0) -> Dataset:
    """Two interleaved half circles; the upper arc gets ceil(n/2) points. Rows are shuffled."""
    if n < 1:
        raise InvalidArgument("n must be positive")
    if noise_std < 0:
        raise InvalidArgument("noise_std must be nonnegative")
    rng = _rng(seed)
    n_up = (n + 1) // 2
    theta = rng.uniform(0.0, math.pi, size=n)
    up, lo = theta[:n_up], theta[n_up:]
    pts = np.empty((n, 2))
    pts[:n_up, 0] = np.cos(up)
    pts[:n_up, 1] = np.sin(up)
    pts[n_up:, 0] = 1.0 - np.cos(lo)
    pts[n_up:, 1] = 0.5 - np.sin(lo)
    if noise_std > 0:
        pts += noise_std * rng.standard_normal((n, 2))
    return Dataset(pts[rng.permutation(n)])


def eight_gaussian_centers(radius: float = 4.0, global_scale: float = 1.0 / math.sqrt(2.0)) -> np.ndarray:
    k = np.arange(8)
    return global_scale * radius * np.column_stack([np.cos(k * np.pi / 4), np.sin(k * np.pi / 4)])


def make_eight_gaussians(
    n: int,
    radius: float = 4.0,
    component_std: float = 0.5,
    global_scale: float = 1.0 / math.sqrt(2.0),
    seed: int = 0,
) -> Dataset:
    if n < 1:
        raise InvalidArgument("n must be positive")
    if radius <= 0:
        raise InvalidArgument("radius must be positive")
    if component_std < 0:
        raise InvalidArgument("component_std must be nonnegative")
    rng = _rng(seed)
    comp = rng.integers(0, 8, size=n)
    centers = eight_gaussian_centers(radius, 1.0)
    pts = centers[comp] + component_std * rng.standard_normal((n, 2))
    return Dataset(global_scale * pts)


def sample_gmm(gmm: GaussianMixture, n: int, seed: int = 0) -> Dataset:
    if n < 1:
        raise InvalidArgument("n must be positive")
    rng = _rng(seed)
    comp = rng.choice(gmm.n_components, size=n, p=gmm.weights)
    z = rng.standard_normal((n, gmm.dim))
    pts = gmm.means[comp] + np.einsum("nij,nj->ni", gmm.chol[comp], z)
    return Dataset(pts)


# ---------------------------------------------------------------------------
# Dataset specs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DatasetSpec:
    """Recipe for a dataset: ``kind`` is moons, eight-gaussians, gmm or file."""

    kind: str
    n: int = 10_000
    seed: int = 0
    params: dict = field(default_factory=dict)

    def build(self) -> Dataset:
        p = dict(self.params)
        if self.kind == "moons":
            return make_moons(self.n, seed=self.seed, **{**MOONS_DEFAULTS, **p})
        if self.kind == "eight-gaussians":
            return make_eight_gaussians(self.n, seed=self.seed, **{**EIGHT_GAUSSIANS_DEFAULTS, **p})
        if self.kind == "gmm":
            gmm = GaussianMixture(p["weights"], p["means"], p["covs"])
            return sample_gmm(gmm, self.n, self.seed)
        if self.kind == "file":
            return load_dataset(p["path"], p.get("format"))
        raise InvalidArgument(f"unknown dataset kind {self.kind!r}")

    def describe(self) -> dict:
        return {"kind": self.kind, "n": self.n, "seed": self.seed, "params": dict(self.params)}


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def infer_format(path) -> str:
    suffix = Path(path).suffix.lower()
    if suffix == ".csv":
        return "csv"
    if suffix in (".f64le", ".bin", ".f64"):
        return "f64le"
    raise InvalidArgument(f"cannot infer dataset format from {path!r}; use csv or f64le")


def save_dataset(ds, path, fmt: str | None = None) -> None:
    ds = ds if isinstance(ds, Dataset) else Dataset(ds)
    fmt = fmt or infer_format(path)
    path = Path(path)
    if fmt == "f64le":
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(ds.n, ds.d))
            fh.write(ds.points.astype("<f8", copy=False).tobytes(order="C"))
    elif fmt == "csv":
        lines = [f"dim={ds.d}"]
        lines.extend(",".join(repr(float(v)) for v in row) for row in ds.points)
        path.write_text("\n".join(lines) + "\n")
    else:
        raise InvalidArgument(f"unknown dataset format {fmt!r}")


def load_dataset(path, fmt: str | None = None) -> Dataset:
    fmt = fmt or infer_format(path)
    if fmt == "f64le":
        return _load_f64le(Path(path).read_bytes())
    if fmt == "csv":
        return _load_csv(Path(path).read_text())
    raise InvalidArgument(f"unknown dataset format {fmt!r}")


def _load_f64le(raw: bytes) -> Dataset:
    if len(raw) < _HEADER.size:
        raise DatasetFormatError(f"truncated header: {len(raw)} of {_HEADER.size} bytes", offset=len(raw))
    n, d = _HEADER.unpack_from(raw)
    if n < 1:
        raise DatasetFormatError("header declares n=0; a dataset needs at least one point", offset=0)
    if d < 1:
        raise DatasetFormatError("header declares d=0", offset=8)
    expected = _HEADER.size + 8 * n * d
    if len(raw) < expected:
        raise DatasetFormatError(
            f"truncated payload: expected {expected} bytes, file ends at byte {len(raw)}", offset=len(raw)
        )
    if len(raw) > expected:
        raise DatasetFormatError(f"{len(raw) - expected} trailing bytes after payload", offset=expected)
    pts = np.frombuffer(raw, dtype="<f8", count=n * d, offset=_HEADER.size).reshape(n, d)
    bad = np.flatnonzero(~np.isfinite(pts).reshape(-1))
    if bad.size:
        raise DatasetFormatError("non-finite value", offset=_HEADER.size + 8 * int(bad[0]))
    return Dataset(pts.astype(np.float64))


def _load_csv(text: str) -> Dataset:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("dim="):
        raise DatasetFormatError("line 1: expected header 'dim=<d>'", offset=1)
    try:
        d = int(lines[0][4:])
    except ValueError:
        raise DatasetFormatError(f"line 1: bad dimension {lines[0][4:]!r}", offset=1) from None
    if d < 1:
        raise DatasetFormatError("line 1: dimension must be positive", offset=1)
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = line.split(",")
        if len(fields) != d:
            raise DatasetFormatError(f"line {lineno}: expected {d} values, got {len(fields)}", offset=lineno)
        try:
            row = [float(f) for f in fields]
        except ValueError:
            raise DatasetFormatError(f"line {lineno}: unparseable number", offset=lineno) from None
        if not all(map(math.isfinite, row)):
            raise DatasetFormatError(f"line {lineno}: non-finite value", offset=lineno)
        rows.append(row)
    if not rows:
        raise DatasetFormatError("no data rows; a dataset needs at least one point", offset=len(lines))
    return Dataset(np.array(rows, dtype=np.float64).reshape(-1, d))
