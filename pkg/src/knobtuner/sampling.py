"""Deterministic sample generation: Latin hypercube designs and box-uniform draws.

Randomness policy: every public entry point takes an integer seed and builds a
counter-based generator (Philox) from it, so identical inputs always yield
identical samples regardless of call order elsewhere in the process.  Derived
streams use ``numpy.random.SeedSequence`` spawn keys, never ad-hoc seed
arithmetic.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .space import ParameterSpace, Setting, UnitBox, to_unit

DESIGN_KINDS = ("lhs", "uniform-box", "exhaustive")


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Generator for a named stream derived from a root seed.

    Args:
        seed: Root seed, any non-negative integer.
        *stream: Optional integers identifying a sub-stream.  Distinct
            stream tuples give statistically independent generators.
    """
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.Philox(ss))


def lhs_points(d: int, m: int, rng: np.random.Generator) -> np.ndarray:
    """Latin hypercube design of m points in [0,1]^d, drawn from ``rng``.

    Per dimension independently: a uniform random permutation assigns each
    point one of the m strata, and the point lands uniformly inside its
    stratum.  Projection onto any axis therefore hits every interval
    [j/m, (j+1)/m) exactly once.
    """
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    if m < 1:
        raise ValueError(f"sample count must be >= 1, got {m}")
    points = np.empty((m, d), dtype=float)
    for dim in range(d):
        perm = rng.permutation(m)
        jitter = rng.random(m)
        points[:, dim] = (perm + jitter) / m
    return points


def uniform_points_in_box(box: UnitBox, n: int, rng: np.random.Generator) -> np.ndarray:
    """n points uniform over an axis-aligned box, drawn from ``rng``."""
    if n < 1:
        raise ValueError(f"sample count must be >= 1, got {n}")
    lo, hi = box.arrays()
    return lo + rng.random((n, box.dimension)) * (hi - lo)


@dataclass(frozen=True)
class SampleDesign:
    """A frozen batch of unit-cube sample points.

    Attributes:
        points: (m, d) array, each row one point.
        seed: Seed that produced the batch.
        kind: "lhs", "uniform-box" or "exhaustive".
    """

    points: np.ndarray
    seed: int
    kind: str

    def __post_init__(self) -> None:
        if self.kind not in DESIGN_KINDS:
            raise ValueError(f"unknown design kind {self.kind!r}")
        if self.points.ndim != 2:
            raise ValueError(f"points must be an (m, d) array, got shape {self.points.shape}")

    @property
    def m(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def __iter__(self):
        return iter(self.points)


def lhs(d: int, m: int, seed: int) -> SampleDesign:
    """Seeded Latin hypercube design over the full unit cube."""
    return SampleDesign(points=lhs_points(d, m, make_rng(seed, 0)), seed=seed, kind="lhs")


def uniform_in_box(box: UnitBox, n: int, seed: int) -> SampleDesign:
    """Seeded uniform batch inside a box."""
    pts = uniform_points_in_box(box, n, make_rng(seed, 1))
    return SampleDesign(points=pts, seed=seed, kind="uniform-box")


def rescale_design(d: int, m_new: int, seed: int) -> SampleDesign:
    """Fresh LHS design at a new sample count, deterministic in (seed, m_new).

    Stratification does not survive subsetting, so changing m means drawing
    a new design; deriving the stream from (seed, m_new) keeps every budget
    reproducible without coupling one budget's design to another's.
    """
    rng = make_rng(seed, 2, m_new)
    return SampleDesign(points=lhs_points(d, m_new, rng), seed=seed, kind="lhs")


def exhaustive_design(
    space: ParameterSpace,
    seed: int,
    skip: Setting | None = None,
) -> SampleDesign:
    """Every cell-center point of a fully discrete space, in random order.

    With m equal to the number of distinct settings, this is the degenerate
    Latin hypercube that covers the whole space exactly once.  ``skip``
    removes one setting's cell (typically a baseline already measured).

    Raises:
        ValueError: if any dimension is continuous.
    """
    if not space.is_fully_discrete():
        cont = [p.name for p in space.params if p.levels is None]
        raise ValueError(f"space has continuous parameters: {', '.join(cont)}")
    axes = [
        [(i + 0.5) / p.levels for i in range(p.levels)]
        for p in space.params
    ]
    grids = np.meshgrid(*axes, indexing="ij")
    points = np.stack([g.ravel() for g in grids], axis=-1)
    if skip is not None:
        skip_point = to_unit(skip, space)
        keep = ~np.all(np.isclose(points, skip_point[None, :]), axis=1)
        points = points[keep]
    order = make_rng(seed, 3).permutation(points.shape[0])
    return SampleDesign(points=points[order], seed=seed, kind="exhaustive")


def write_design_csv(
    design: SampleDesign,
    path: str | Path,
    names: Sequence[str] | None = None,
) -> None:
    """Write a design as CSV with one header row of coordinate names."""
    header = list(names) if names is not None else [f"u{j}" for j in range(design.d)]
    if len(header) != design.d:
        raise ValueError(f"expected {design.d} names, got {len(header)}")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in design.points:
            writer.writerow([repr(float(x)) for x in row])


def stratum_counts(points: np.ndarray, m: int | None = None) -> np.ndarray:
    """Per-dimension histogram of which stratum each point occupies.

    Returns an (m, d) count matrix; a valid LHS design is all ones.
    """
    pts = np.asarray(points, dtype=float)
    if m is None:
        m = pts.shape[0]
    idx = np.minimum(np.floor(pts * m).astype(int), m - 1)
    counts = np.zeros((m, pts.shape[1]), dtype=int)
    for dim in range(pts.shape[1]):
        np.add.at(counts[:, dim], idx[:, dim], 1)
    return counts


def is_latin(points: np.ndarray, m: int | None = None) -> bool:
    """True iff every axis projection hits every stratum exactly once."""
    return bool(np.all(stratum_counts(points, m) == 1))
