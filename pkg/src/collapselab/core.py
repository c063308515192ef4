"""Seeded random streams, time grids, and synthetic dataset generators.

Reproducibility contract: every random quantity in this package is drawn
from a Philox counter-based generator keyed by ``(seed, stream)``. Distinct
stream indices give independent, platform-stable streams, so a parallel
worker can reproduce exactly what a serial run produced by re-deriving the
same keys.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ParameterError

# Floor on sampling/evaluation times: score = -eps_hat / sigma_t divides by
# sigma_t, which vanishes at t = 0.
T_MIN_DEFAULT = 1e-3

DATASET_VARIANTS = ("chessboard", "spiral", "semicircles", "mog2d", "mognd", "mog1d")


def rng_stream(seed: int, stream: int = 0) -> np.random.Generator:
    """Generator for the Philox stream keyed by ``(seed, stream)``."""
    key = np.array([np.uint64(seed), np.uint64(stream)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def time_grid(steps: int, t_min: float, t_max: float) -> np.ndarray:
    """``steps + 1`` evenly spaced times, descending from t_max to t_min."""
    if steps < 1:
        raise ParameterError(f"steps must be >= 1, got {steps}")
    if not (0.0 <= t_min < t_max <= 1.0):
        raise ParameterError(f"need 0 <= t_min < t_max <= 1, got ({t_min}, {t_max})")
    return np.linspace(t_max, t_min, steps + 1)


@dataclass(frozen=True)
class DatasetSpec:
    """Parameters of one synthetic dataset family.

    Only the fields relevant to ``variant`` are used:

    * ``chessboard``  - 4x4 grid of 1x1 cells, points uniform in alternate cells
    * ``spiral``      - radius 0 -> 2 linear in angle 0 -> 4*pi, coordinate noise
    * ``semicircles`` - two radius-1 arcs centered (0.5, 0.1) / (-0.5, -0.1)
    * ``mog2d``       - ``components`` equal-weight modes on a circle of ``radius``
    * ``mognd``       - 0.5 N(-1, component_variance I) + 0.5 N(+1, component_variance I)
    * ``mog1d``       - the 1-dimensional case of ``mognd``

    Note the two conventions carried by the source setups: ``mog2d`` is
    parameterized by a component standard deviation, ``mognd`` by a
    component variance.
    """

    variant: str
    dimension: int = 2
    noise_std: float = 0.1
    component_std: float = 0.2
    component_variance: float = 0.2
    radius: float = 2.0
    components: int = 6

    def __post_init__(self):
        if self.variant not in DATASET_VARIANTS:
            raise ParameterError(
                f"unknown dataset variant {self.variant!r}; expected one of {DATASET_VARIANTS}"
            )
        if self.variant in ("chessboard", "spiral", "semicircles", "mog2d"):
            object.__setattr__(self, "dimension", 2)
        if self.variant == "mog1d":
            object.__setattr__(self, "dimension", 1)
        if self.dimension < 1:
            raise ParameterError(f"dimension must be >= 1, got {self.dimension}")
        if self.noise_std < 0:
            raise ParameterError(f"noise_std must be >= 0, got {self.noise_std}")
        if self.component_std <= 0:
            raise ParameterError(f"component_std must be > 0, got {self.component_std}")
        if self.component_variance <= 0:
            raise ParameterError(
                f"component_variance must be > 0, got {self.component_variance}"
            )
        if self.components < 1:
            raise ParameterError(f"components must be >= 1, got {self.components}")


@dataclass
class Dataset:
    """An (N, d) matrix of samples plus the spec/seed that generated it."""

    points: np.ndarray
    spec: Optional[DatasetSpec] = None
    seed: Optional[int] = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.ndim != 2:
            raise ParameterError(f"points must be 2-D, got shape {self.points.shape}")
        if self.points.shape[1] < 1:
            raise ParameterError("points must have at least one column")
        if self.points.size and not np.all(np.isfinite(self.points)):
            raise ParameterError("points contain non-finite entries")

    def __len__(self):
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


# Cells of the 4x4 board with even floor(x) + floor(y); the active half.
_CHESS_CELLS = np.array(
    [(i, j) for i in range(4) for j in range(4) if (i + j) % 2 == 0], dtype=np.float64
)


def _gen_chessboard(spec, n, g):
    cells = _CHESS_CELLS[g.integers(0, len(_CHESS_CELLS), size=n)]
    return cells + g.uniform(0.0, 1.0, size=(n, 2))


def _gen_spiral(spec, n, g):
    theta = g.uniform(0.0, 4.0 * np.pi, size=n)
    r = theta / (2.0 * np.pi)
    pts = np.stack([r * np.cos(theta), r * np.sin(theta)], axis=1)
    return pts + spec.noise_std * g.standard_normal((n, 2))


def _gen_semicircles(spec, n, g):
    # Lower arc around (0.5, 0.1), upper arc around (-0.5, -0.1), interleaved
    # like the usual two-moons layout; points uniform in arc angle.
    arm = g.integers(0, 2, size=n)
    theta = g.uniform(0.0, np.pi, size=n)
    phi = np.where(arm == 0, np.pi + theta, theta)
    cx = np.where(arm == 0, 0.5, -0.5)
    cy = np.where(arm == 0, 0.1, -0.1)
    pts = np.stack([cx + np.cos(phi), cy + np.sin(phi)], axis=1)
    return pts + spec.noise_std * g.standard_normal((n, 2))


def _gen_mog2d(spec, n, g):
    angles = 2.0 * np.pi * np.arange(spec.components) / spec.components
    centers = spec.radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    comp = g.integers(0, spec.components, size=n)
    return centers[comp] + spec.component_std * g.standard_normal((n, 2))


def _gen_mognd(spec, n, g):
    d = spec.dimension
    sign = 2.0 * g.integers(0, 2, size=n).astype(np.float64) - 1.0
    return sign[:, None] * np.ones(d) + np.sqrt(spec.component_variance) * g.standard_normal((n, d))


_GENERATORS = {
    "chessboard": _gen_chessboard,
    "spiral": _gen_spiral,
    "semicircles": _gen_semicircles,
    "mog2d": _gen_mog2d,
    "mognd": _gen_mognd,
    "mog1d": _gen_mognd,
}


def gen_dataset(spec: DatasetSpec, n: int, seed: int) -> Dataset:
    """Draw ``n`` points of ``spec`` from the stream keyed by ``seed``."""
    if n < 0:
        raise ParameterError(f"n must be >= 0, got {n}")
    g = rng_stream(seed, 0)
    if n == 0:
        pts = np.empty((0, spec.dimension))
    else:
        pts = _GENERATORS[spec.variant](spec, n, g)
    return Dataset(points=pts, spec=spec, seed=seed)


def save_dataset_csv(dataset: Dataset, path) -> None:
    """Write ``dim0,dim1,...`` header plus one row per sample."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"dim{i}" for i in range(dataset.dim)])
        for row in dataset.points:
            writer.writerow([repr(float(v)) for v in row])


def load_dataset_csv(path) -> Dataset:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or not all(h.startswith("dim") for h in header):
            raise ParameterError(f"{path}: expected a dim0,dim1,... header")
        rows = [[float(v) for v in row] for row in reader if row]
    pts = np.array(rows, dtype=np.float64) if rows else np.empty((0, len(header)))
    if rows and pts.shape[1] != len(header):
        raise ParameterError(f"{path}: row width does not match header")
    return Dataset(points=pts)
