"""Closed-form synthetic performance surfaces and a brute-force grid oracle.

Each surface pairs a realistic knob space with a deterministic value
function whose shape mimics a class of real systems: a dominant-knob step
function with plateaus, an irregular bumpy landscape with many local optima,
a smooth surface with a sharp spike at one integer value, and capacity
surfaces whose composition is throughput-limited by the slower stage.
Constants are frozen here so every optimizer claim can be checked against
the exact grid optimum.

With ``noise=0`` (the default) every surface is a pure function of the
setting; with noise, a zero-mean uniform jitter is derived from the noise
seed and the setting alone, so repeated evaluation of one setting is still
deterministic and order-independent.
"""

from __future__ import annotations

import hashlib
import itertools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .space import (
    Parameter,
    ParameterSpace,
    Setting,
    check_setting,
)


@dataclass(frozen=True)
class SyntheticSurface:
    """A named, deterministic performance function over a knob space.

    Attributes:
        surface_id: Catalog name.
        space: The knob space the function is total over.
        metric_name: Name the measured value is reported under.
        noise: Zero-mean uniform jitter amplitude; 0 disables noise.
        noise_seed: Seed for the jitter stream.
    """

    surface_id: str
    space: ParameterSpace
    fn: Callable[[Setting], float]
    metric_name: str = "throughput"
    noise: float = 0.0
    noise_seed: int = 0

    def value(self, setting: Sequence) -> float:
        """Evaluate at a setting, validating it first."""
        s = check_setting(setting, self.space)
        return self.raw_value(s)

    def raw_value(self, setting: Setting) -> float:
        """Evaluate without validation; caller guarantees a valid setting."""
        v = float(self.fn(setting))
        if self.noise > 0.0:
            v += self._jitter(setting)
        return v

    def _jitter(self, setting: Setting) -> float:
        digest = hashlib.blake2b(
            repr((self.noise_seed, setting)).encode(), digest_size=8
        ).digest()
        u = int.from_bytes(digest, "big") / 2**64
        return self.noise * (2.0 * u - 1.0)

    def default_setting(self) -> Setting:
        return self.space.default_setting()

    def with_noise(self, noise: float, noise_seed: int = 0) -> "SyntheticSurface":
        return SyntheticSurface(
            surface_id=self.surface_id,
            space=self.space,
            fn=self.fn,
            metric_name=self.metric_name,
            noise=noise,
            noise_seed=noise_seed,
        )


def _ramp(value: float, lo: float, hi: float) -> float:
    """Normalized unimodal ramp t(2-t): exactly 0 at lo, exactly 1 at hi."""
    t = (float(value) - lo) / (hi - lo)
    return t * (2.0 - t)


# ---------------------------------------------------------------------------
# Steplike: one dominant enum knob, two plateaus, mild secondary ramps.
# Calibration: value(default) = 9815 exactly, global max = 118184 exactly
# (base 110000 at the good plateau + secondary weights summing to 8184).
# ---------------------------------------------------------------------------

_STEP_BASE = {"OFF": 9815.0, "ON": 110000.0, "DEMAND": 30000.0}
_STEP_WEIGHTS = (
    ("buffer_pool_mb", 4096.0, 128.0, 16384.0),
    ("io_capacity", 2048.0, 100.0, 20000.0),
    ("thread_cache_size", 1024.0, 0.0, 16.0),
    ("checkpoint_interval", 1016.0, 1.0, 9.0),
)


def surface_steplike() -> SyntheticSurface:
    """Two-plateau surface dominated by a cache-mode enum knob.

    The four secondary knobs each add a monotone ramp worth its weight at
    the high end and exactly zero at the default, so the default setting
    sits at the low plateau's floor and the optimum at the high plateau's
    ceiling.
    """
    space = ParameterSpace.of(
        Parameter.enum("query_cache_type", ("OFF", "ON", "DEMAND"), default="OFF"),
        Parameter.real("buffer_pool_mb", 128, 16384, default=128.0),
        Parameter.real("io_capacity", 100, 20000, default=100.0),
        Parameter.integer("thread_cache_size", 0, 16, default=0),
        Parameter.integer("checkpoint_interval", 1, 9, default=1),
    )

    def fn(setting: Setting) -> float:
        cache, *rest = setting
        total = _STEP_BASE[cache]
        for (name, weight, lo, hi), v in zip(_STEP_WEIGHTS, rest):
            total += weight * _ramp(v, lo, hi)
        return total

    return SyntheticSurface("steplike", space, fn, metric_name="ops_per_sec")


# ---------------------------------------------------------------------------
# Bumpy: irregular landscape over two numeric knobs, many local optima, a
# broad hill capped by one sharp peak, and a flag knob that relocates both.
# Constants chosen so the top 5% of the range is confined to the peak.
# ---------------------------------------------------------------------------

_BUMPY_BASE = 200.0
_BUMPY_HILL_AMP = 150.0
_BUMPY_HILL_SIGMA = 0.12
_BUMPY_PEAK_AMP = 80.0
_BUMPY_PEAK_SIGMA = 0.02
_BUMPY_RIPPLE_AMP = 14.0
_BUMPY_CENTERS = {False: (0.315, 0.655), True: (0.765, 0.445)}


def _bumpy_unit_value(u1: float, u2: float, shared_jvm: bool) -> float:
    c1, c2 = _BUMPY_CENTERS[shared_jvm]
    r2 = (u1 - c1) ** 2 + (u2 - c2) ** 2
    hill = _BUMPY_HILL_AMP * math.exp(-r2 / (2.0 * _BUMPY_HILL_SIGMA**2))
    peak = _BUMPY_PEAK_AMP * math.exp(-r2 / (2.0 * _BUMPY_PEAK_SIGMA**2))
    ripple = _BUMPY_RIPPLE_AMP * (
        math.sin(2.0 * math.pi * (3.3 * u1 + 0.2)) * math.sin(2.0 * math.pi * (2.7 * u2 + 0.6))
        + math.sin(2.0 * math.pi * (5.1 * u1 + 1.9 * u2 + 0.4))
    )
    return _BUMPY_BASE + hill + peak + ripple


def surface_bumpy() -> SyntheticSurface:
    """Irregularly bumpy surface whose optimum region moves with a flag.

    Two thread-pool knobs span the landscape; the co-deployment flag
    relocates the hill and its peak, so the best area under one deployment
    is mediocre under the other.
    """
    space = ParameterSpace.of(
        Parameter.real("max_threads", 16, 512, default=64.0),
        Parameter.real("accept_count", 1, 1024, default=128.0),
        Parameter.boolean("shared_jvm", default=False),
    )

    def fn(setting: Setting) -> float:
        threads, accept, flag = setting
        u1 = (float(threads) - 16.0) / (512.0 - 16.0)
        u2 = (float(accept) - 1.0) / (1024.0 - 1.0)
        return _bumpy_unit_value(u1, u2, bool(flag))

    return SyntheticSurface("bumpy", space, fn, metric_name="requests_per_sec")


# ---------------------------------------------------------------------------
# Spiky: smooth ramps plus a tall narrow spike at one integer knob value.
# ---------------------------------------------------------------------------

_SPIKY_CORES_AT = 4
_SPIKY_HEIGHT = 220.0


def surface_spiky(spike_height: float = _SPIKY_HEIGHT) -> SyntheticSurface:
    """Smooth surface that rises sharply when the cores knob is exactly 4.

    ``spike_height=0`` ablates the spike, leaving the smooth surface whose
    optimum is at the high end of every ramp.
    """
    space = ParameterSpace.of(
        Parameter.integer("executor_cores", 1, 16, default=1),
        Parameter.real("executor_memory_mb", 512, 8192, default=512.0),
        Parameter.integer("shuffle_partitions", 8, 512, default=8),
    )

    def fn(setting: Setting) -> float:
        cores, memory, partitions = setting
        smooth = 120.0 + 60.0 * (
            _ramp(cores, 1, 16) + _ramp(memory, 512, 8192) + _ramp(partitions, 8, 512)
        ) / 3.0
        if int(cores) == _SPIKY_CORES_AT:
            smooth += spike_height
        return smooth

    return SyntheticSurface("spiky", space, fn, metric_name="records_per_sec")


# ---------------------------------------------------------------------------
# Quadratic 1-D: the textbook sanity surface.
# ---------------------------------------------------------------------------


def surface_quad1d() -> SyntheticSurface:
    """Concave parabola -(x-3)^2 on [0, 10]; optimum 0 at x = 3."""
    space = ParameterSpace.of(Parameter.real("x", 0, 10, default=0.0))

    def fn(setting: Setting) -> float:
        (x,) = setting
        return 0.0 - (float(x) - 3.0) ** 2

    return SyntheticSurface("quad1d", space, fn, metric_name="score")


# ---------------------------------------------------------------------------
# Capacity surfaces: a flat frontend, a tunable backend, and min-composition.
# ---------------------------------------------------------------------------


def surface_frontend() -> SyntheticSurface:
    """Constant capacity 100; its knobs change nothing."""
    space = ParameterSpace.of(
        Parameter.real("fe_cache_mb", 64, 1024, default=64.0),
        Parameter.integer("fe_workers", 1, 8, default=1),
    )
    return SyntheticSurface(
        "frontend", space, lambda s: 100.0, metric_name="requests_per_sec"
    )


def surface_backend() -> SyntheticSurface:
    """Capacity 100 at defaults, up to exactly 163 with both knobs high."""
    space = ParameterSpace.of(
        Parameter.integer("be_pool_size", 4, 128, default=4),
        Parameter.integer("be_io_threads", 1, 32, default=1),
    )

    def fn(setting: Setting) -> float:
        pool, io = setting
        return 100.0 + 63.0 * (_ramp(pool, 4, 128) + _ramp(io, 1, 32)) / 2.0

    return SyntheticSurface("backend", space, fn, metric_name="requests_per_sec")


def surface_composed(a: SyntheticSurface, b: SyntheticSurface) -> SyntheticSurface:
    """End-to-end capacity of two co-deployed stages: the min of the two.

    The composed space concatenates both component spaces; parameter names
    must not collide.
    """
    clash = set(a.space.names) & set(b.space.names)
    if clash:
        raise ValueError(f"parameter name collision: {', '.join(sorted(clash))}")
    space = ParameterSpace(params=a.space.params + b.space.params)
    split = a.space.dimension

    def fn(setting: Setting) -> float:
        return min(a.raw_value(setting[:split]), b.raw_value(setting[split:]))

    return SyntheticSurface(
        f"{a.surface_id}+{b.surface_id}", space, fn, metric_name="requests_per_sec"
    )


# ---------------------------------------------------------------------------
# Catalog
# ---------------------------------------------------------------------------

_CATALOG: dict[str, Callable[[], SyntheticSurface]] = {
    "steplike": surface_steplike,
    "bumpy": surface_bumpy,
    "spiky": surface_spiky,
    "quad1d": surface_quad1d,
    "frontend": surface_frontend,
    "backend": surface_backend,
    "frontend+backend": lambda: surface_composed(surface_frontend(), surface_backend()),
}


def surface_catalog() -> tuple[str, ...]:
    """Catalog names, stable order."""
    return tuple(_CATALOG)


def get_surface(surface_id: str, noise: float = 0.0, noise_seed: int = 0) -> SyntheticSurface:
    """Construct a catalog surface by name, optionally with jitter."""
    if surface_id not in _CATALOG:
        raise ValueError(
            f"unknown surface {surface_id!r}; available: {', '.join(_CATALOG)}"
        )
    surface = _CATALOG[surface_id]()
    if noise > 0.0:
        surface = surface.with_noise(noise, noise_seed)
    return surface


# ---------------------------------------------------------------------------
# Brute-force oracle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OracleResult:
    """Exact maximum of a surface over a finite evaluation grid."""

    best_setting: Setting
    best_value: float
    resolutions: tuple[int, ...]
    evaluation_count: int


def grid_axes(space: ParameterSpace, resolution: int) -> list[list]:
    """Per-dimension value lists for an exhaustive grid.

    Discrete dims enumerate every level, unless a dim has more levels than
    ``resolution``, in which case ``resolution`` evenly spread levels
    (always including both ends) stand in.  Continuous dims take
    ``resolution`` evenly spaced values including both bounds.
    """
    if resolution < 2:
        raise ValueError(f"resolution must be >= 2, got {resolution}")
    axes: list[list] = []
    for p in space.params:
        if p.levels is not None:
            if p.levels <= resolution:
                axes.append([p.level_value(i) for i in range(p.levels)])
            else:
                idx = np.unique(np.round(np.linspace(0, p.levels - 1, resolution)).astype(int))
                axes.append([p.level_value(int(i)) for i in idx])
        else:
            axes.append([float(x) for x in np.linspace(p.lo, p.hi, resolution)])
    return axes


def brute_force(
    surface: SyntheticSurface, resolution: int = 25, cap: int = 10**7
) -> OracleResult:
    """Exhaustively evaluate a grid and return the exact grid maximum.

    Ties go to the first grid point in axis order, making the result
    deterministic.

    Raises:
        ValueError: if the grid would exceed ``cap`` evaluations.
    """
    axes = grid_axes(surface.space, resolution)
    total = math.prod(len(a) for a in axes)
    if total > cap:
        raise ValueError(f"grid of {total} evaluations exceeds cap {cap}")
    best_setting: Setting | None = None
    best_value = -math.inf
    for combo in itertools.product(*axes):
        v = surface.raw_value(combo)
        if v > best_value:
            best_value = v
            best_setting = combo
    return OracleResult(
        best_setting=best_setting,
        best_value=best_value,
        resolutions=tuple(len(a) for a in axes),
        evaluation_count=total,
    )
