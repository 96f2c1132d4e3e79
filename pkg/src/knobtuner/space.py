"""Mixed-type configuration parameter spaces and their unit-cube encoding.

A :class:`ParameterSpace` declares an ordered list of tunable knobs (real,
integer, boolean or enumerated), and every search component works in the unit
hypercube ``[0, 1]^d`` through :func:`to_unit` / :func:`from_unit`.  Discrete
values map to cell centers ``(i + 0.5) / k`` so the round trip
``from_unit(to_unit(s)) == s`` is exact, and unit-space strata align with
levels during stratified sampling.

All types here are immutable values; all functions are pure.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterator, Sequence

import numpy as np

SPACE_FORMAT_VERSION = 1

KINDS = ("real", "int", "bool", "enum")

#: Values a single knob can take.
ParamValue = Any

#: One concrete value per parameter, position-aligned with the space.
Setting = tuple


class SpaceError(ValueError):
    """Raised for malformed parameter or space declarations."""


class InvalidSettingError(ValueError):
    """Raised when an operation requires a valid setting but got violations."""

    def __init__(self, violations: Sequence["Violation"]):
        self.violations = tuple(violations)
        super().__init__("; ".join(str(v) for v in violations))


@dataclass(frozen=True)
class Violation:
    """One failed domain check: which coordinate and why.

    ``index`` is -1 for whole-setting problems (e.g. wrong length).
    """

    index: int
    name: str
    reason: str

    def __str__(self) -> str:
        where = f"dim {self.index} ({self.name})" if self.index >= 0 else "setting"
        return f"{where}: {self.reason}"


@dataclass(frozen=True)
class Parameter:
    """A single named knob with a typed domain.

    Use the factory classmethods (:meth:`real`, :meth:`integer`,
    :meth:`boolean`, :meth:`enum`) rather than the raw constructor.

    Attributes:
        name: Non-empty identifier, unique within a space.
        kind: One of ``"real"``, ``"int"``, ``"bool"``, ``"enum"``.
        lo/hi: Closed numeric bounds (real and int kinds only).
        labels: Ordered distinct labels (enum kind only).
        default: Optional default value, used as the baseline when the
            caller does not supply one.
    """

    name: str
    kind: str
    lo: float | int | None = None
    hi: float | int | None = None
    labels: tuple[str, ...] | None = None
    default: ParamValue = None

    def __post_init__(self) -> None:
        if not self.name or not str(self.name).strip():
            raise SpaceError("parameter name must be non-empty")
        if self.kind not in KINDS:
            raise SpaceError(f"parameter {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == "real":
            if self.lo is None or self.hi is None:
                raise SpaceError(f"parameter {self.name!r}: real kind requires lo and hi")
            if not (math.isfinite(float(self.lo)) and math.isfinite(float(self.hi))):
                raise SpaceError(f"parameter {self.name!r}: bounds must be finite")
            if not (float(self.lo) < float(self.hi)):
                raise SpaceError(f"parameter {self.name!r}: requires lo < hi, got [{self.lo}, {self.hi}]")
        elif self.kind == "int":
            if self.lo is None or self.hi is None:
                raise SpaceError(f"parameter {self.name!r}: int kind requires lo and hi")
            if int(self.lo) != self.lo or int(self.hi) != self.hi:
                raise SpaceError(f"parameter {self.name!r}: int bounds must be integers")
            if not (int(self.lo) <= int(self.hi)):
                raise SpaceError(f"parameter {self.name!r}: requires lo <= hi, got [{self.lo}, {self.hi}]")
        elif self.kind == "enum":
            if not self.labels:
                raise SpaceError(f"parameter {self.name!r}: enum requires a non-empty label list")
            if len(set(self.labels)) != len(self.labels):
                raise SpaceError(f"parameter {self.name!r}: enum labels must be unique")
        if self.default is not None and not self.contains(self.default):
            raise SpaceError(f"parameter {self.name!r}: default {self.default!r} outside domain")

    # -- factories ---------------------------------------------------------

    @classmethod
    def real(cls, name: str, lo: float, hi: float, default: float | None = None) -> "Parameter":
        return cls(name=name, kind="real", lo=float(lo), hi=float(hi), default=default)

    @classmethod
    def integer(cls, name: str, lo: int, hi: int, default: int | None = None) -> "Parameter":
        return cls(name=name, kind="int", lo=int(lo), hi=int(hi), default=default)

    @classmethod
    def boolean(cls, name: str, default: bool | None = None) -> "Parameter":
        return cls(name=name, kind="bool", default=default)

    @classmethod
    def enum(cls, name: str, labels: Sequence[str], default: str | None = None) -> "Parameter":
        return cls(name=name, kind="enum", labels=tuple(labels), default=default)

    # -- domain queries ----------------------------------------------------

    @property
    def levels(self) -> int | None:
        """Number of discrete levels, or None for a real parameter."""
        if self.kind == "int":
            return int(self.hi) - int(self.lo) + 1
        if self.kind == "bool":
            return 2
        if self.kind == "enum":
            return len(self.labels)
        return None

    def contains(self, value: ParamValue) -> bool:
        """Whether ``value`` lies in this parameter's domain."""
        if self.kind == "real":
            return isinstance(value, (int, float)) and not isinstance(value, bool) \
                and math.isfinite(value) and self.lo <= value <= self.hi
        if self.kind == "int":
            return isinstance(value, int) and not isinstance(value, bool) \
                and self.lo <= value <= self.hi
        if self.kind == "bool":
            return isinstance(value, bool)
        return value in self.labels

    def level_index(self, value: ParamValue) -> int:
        """0-based level index of a discrete value (int/bool/enum kinds)."""
        if self.kind == "int":
            return int(value) - int(self.lo)
        if self.kind == "bool":
            return int(bool(value))
        if self.kind == "enum":
            return self.labels.index(value)
        raise SpaceError(f"parameter {self.name!r} is continuous, has no levels")

    def level_value(self, index: int) -> ParamValue:
        """Value at a 0-based level index (int/bool/enum kinds)."""
        if self.kind == "int":
            return int(self.lo) + index
        if self.kind == "bool":
            return bool(index)
        if self.kind == "enum":
            return self.labels[index]
        raise SpaceError(f"parameter {self.name!r} is continuous, has no levels")

    def describe(self) -> str:
        if self.kind in ("real", "int"):
            return f"{self.name}: {self.kind} in [{self.lo}, {self.hi}]"
        if self.kind == "bool":
            return f"{self.name}: bool"
        return f"{self.name}: enum {{{', '.join(self.labels)}}}"


@dataclass(frozen=True)
class ParameterSpace:
    """Ordered collection of parameters; the search universe.

    Declaration order is the canonical coordinate order for settings and
    unit points.
    """

    params: tuple[Parameter, ...]

    def __post_init__(self) -> None:
        if len(self.params) < 1:
            raise SpaceError("a parameter space needs at least one parameter")
        names = [p.name for p in self.params]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise SpaceError(f"duplicate parameter names: {', '.join(dupes)}")

    @classmethod
    def of(cls, *params: Parameter) -> "ParameterSpace":
        return cls(params=tuple(params))

    @property
    def dimension(self) -> int:
        return len(self.params)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.params)

    def __len__(self) -> int:
        return len(self.params)

    def __iter__(self) -> Iterator[Parameter]:
        return iter(self.params)

    def __getitem__(self, key: int | str) -> Parameter:
        if isinstance(key, str):
            for p in self.params:
                if p.name == key:
                    return p
            raise KeyError(key)
        return self.params[key]

    def index_of(self, name: str) -> int:
        for i, p in enumerate(self.params):
            if p.name == name:
                return i
        raise KeyError(name)

    def is_fully_discrete(self) -> bool:
        return all(p.levels is not None for p in self.params)

    def total_settings(self) -> int | None:
        """Cardinality of a fully discrete space, None if any dim is real."""
        if not self.is_fully_discrete():
            return None
        total = 1
        for p in self.params:
            total *= p.levels
        return total

    def default_setting(self) -> Setting:
        """Setting built from per-parameter defaults.

        Raises:
            SpaceError: if any parameter lacks a default.
        """
        missing = [p.name for p in self.params if p.default is None]
        if missing:
            raise SpaceError(f"no default declared for: {', '.join(missing)}")
        return tuple(p.default for p in self.params)

    def setting_from_dict(self, values: dict[str, ParamValue]) -> Setting:
        """Build a position-aligned setting from a name->value mapping.

        Unknown names are rejected; missing names fall back to the
        parameter default when one is declared.
        """
        unknown = sorted(set(values) - set(self.names))
        if unknown:
            raise SpaceError(f"unknown parameter names: {', '.join(unknown)}")
        out = []
        for p in self.params:
            if p.name in values:
                out.append(values[p.name])
            elif p.default is not None:
                out.append(p.default)
            else:
                raise SpaceError(f"no value or default for parameter {p.name!r}")
        return tuple(out)

    def setting_to_dict(self, setting: Setting) -> dict[str, ParamValue]:
        return {p.name: v for p, v in zip(self.params, setting)}


@dataclass(frozen=True)
class UnitBox:
    """Per-dimension closed subintervals of [0, 1]."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.lo) != len(self.hi):
            raise SpaceError("box lo/hi dimension mismatch")
        for a, b in zip(self.lo, self.hi):
            if not (0.0 <= a <= b <= 1.0):
                raise SpaceError(f"invalid box interval [{a}, {b}]")

    @classmethod
    def full(cls, d: int) -> "UnitBox":
        return cls(lo=(0.0,) * d, hi=(1.0,) * d)

    @property
    def dimension(self) -> int:
        return len(self.lo)

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.lo, dtype=float), np.asarray(self.hi, dtype=float)

    def contains(self, point: Sequence[float]) -> bool:
        return all(a <= x <= b for a, x, b in zip(self.lo, point, self.hi))


# ---------------------------------------------------------------------------
# Core operations
# ---------------------------------------------------------------------------


def validate(setting: Sequence[ParamValue], space: ParameterSpace) -> list[Violation]:
    """Check a setting against a space; empty list means valid.

    Every violating coordinate is reported, not just the first.
    """
    setting = tuple(setting)
    if len(setting) != space.dimension:
        return [Violation(-1, "", f"expected {space.dimension} values, got {len(setting)}")]
    out: list[Violation] = []
    for i, (p, v) in enumerate(zip(space.params, setting)):
        if p.contains(v):
            continue
        if p.kind in ("real", "int"):
            reason = f"value {v!r} out of range [{p.lo}, {p.hi}]"
            if p.kind == "int" and isinstance(v, float):
                reason = f"value {v!r} is not an integer"
        elif p.kind == "bool":
            reason = f"value {v!r} is not a boolean"
        else:
            reason = f"value {v!r} not one of {{{', '.join(p.labels)}}}"
        out.append(Violation(i, p.name, reason))
    return out


def check_setting(setting: Sequence[ParamValue], space: ParameterSpace) -> Setting:
    """Validate and return the setting as a tuple, or raise.

    Raises:
        InvalidSettingError: with the full violation list.
    """
    violations = validate(setting, space)
    if violations:
        raise InvalidSettingError(violations)
    return tuple(setting)


def check_unit_point(point: Sequence[float], d: int) -> np.ndarray:
    """Validate a unit-cube point and return it as a float array."""
    arr = np.asarray(point, dtype=float)
    if arr.shape != (d,):
        raise ValueError(f"expected a point of dimension {d}, got shape {arr.shape}")
    if np.any(arr < 0.0) or np.any(arr > 1.0) or not np.all(np.isfinite(arr)):
        bad = [i for i, x in enumerate(arr) if not (0.0 <= x <= 1.0)]
        raise ValueError(f"coordinates outside [0, 1] at dims {bad}")
    return arr


def to_unit(setting: Sequence[ParamValue], space: ParameterSpace) -> np.ndarray:
    """Map a valid setting to unit-cube coordinates.

    Real values map affinely onto [0, 1]; discrete level i of k maps to the
    cell center ``(i + 0.5) / k`` (booleans are 2-level: False -> 0.25,
    True -> 0.75).
    """
    s = check_setting(setting, space)
    coords = np.empty(space.dimension, dtype=float)
    for i, (p, v) in enumerate(zip(space.params, s)):
        if p.kind == "real":
            coords[i] = (float(v) - p.lo) / (p.hi - p.lo)
        else:
            k = p.levels
            coords[i] = (p.level_index(v) + 0.5) / k
    return coords


def from_unit(point: Sequence[float], space: ParameterSpace) -> Setting:
    """Map unit-cube coordinates to a concrete setting.

    Discrete dims use ``min(floor(u * k), k - 1)`` so u = 1.0 still decodes
    to the last level.  Inverse of :func:`to_unit` on discrete dims exactly,
    and up to float rounding on real dims.
    """
    arr = check_unit_point(point, space.dimension)
    values: list[ParamValue] = []
    for p, u in zip(space.params, arr):
        if p.kind == "real":
            values.append(p.lo + float(u) * (p.hi - p.lo))
        else:
            values.append(p.level_value(unit_to_level(float(u), p.levels)))
    return tuple(values)


def unit_to_level(u: float, k: int) -> int:
    """Quantize a unit coordinate to one of k levels: min(floor(u*k), k-1)."""
    return min(int(math.floor(u * k)), k - 1)


def clip_box(center: Sequence[float], radius: float) -> UnitBox:
    """Axis-aligned box of half-width ``radius`` around ``center``, clipped to the cube.

    The local subspace searched during exploitation.  Never empty.

    Raises:
        ValueError: if radius <= 0.
    """
    if not (radius > 0.0):
        raise ValueError(f"radius must be positive, got {radius}")
    center = np.atleast_1d(np.asarray(center, dtype=float))
    arr = check_unit_point(center, center.shape[0])
    lo = np.maximum(0.0, arr - radius)
    hi = np.minimum(1.0, arr + radius)
    return UnitBox(lo=tuple(float(x) for x in lo), hi=tuple(float(x) for x in hi))


# ---------------------------------------------------------------------------
# Space file (JSON) schema
# ---------------------------------------------------------------------------
#
# {
#   "format_version": 1,
#   "parameters": [
#     {"name": "buffer_mb", "kind": "real", "lo": 64, "hi": 4096, "default": 64},
#     {"name": "workers",   "kind": "int",  "lo": 1,  "hi": 32},
#     {"name": "direct_io", "kind": "bool", "default": false},
#     {"name": "policy",    "kind": "enum", "labels": ["LRU", "FIFO"]}
#   ]
# }
#
# "default" is optional everywhere.  Order in the file is the coordinate order.


def space_from_json(obj: Any) -> ParameterSpace:
    """Build a ParameterSpace from parsed space-file JSON.

    Errors name the offending parameter and field.
    """
    if isinstance(obj, list):
        entries = obj
    elif isinstance(obj, dict):
        if "parameters" not in obj:
            raise SpaceError("space file: missing 'parameters' field")
        entries = obj["parameters"]
        version = obj.get("format_version", SPACE_FORMAT_VERSION)
        if version != SPACE_FORMAT_VERSION:
            raise SpaceError(f"space file: unsupported format_version {version!r}")
    else:
        raise SpaceError("space file: expected an object with a 'parameters' list")
    if not isinstance(entries, list) or not entries:
        raise SpaceError("space file: 'parameters' must be a non-empty list")

    params: list[Parameter] = []
    for pos, entry in enumerate(entries):
        if not isinstance(entry, dict):
            raise SpaceError(f"space file: parameter #{pos} is not an object")
        name = entry.get("name")
        if not name or not isinstance(name, str):
            raise SpaceError(f"space file: parameter #{pos}: missing or invalid 'name'")
        kind = entry.get("kind")
        if kind not in KINDS:
            raise SpaceError(f"space file: parameter {name!r}: invalid 'kind' {kind!r}")
        default = entry.get("default")
        try:
            if kind == "real":
                _require_fields(name, entry, ("lo", "hi"))
                params.append(Parameter.real(name, entry["lo"], entry["hi"], default))
            elif kind == "int":
                _require_fields(name, entry, ("lo", "hi"))
                params.append(Parameter.integer(name, entry["lo"], entry["hi"], default))
            elif kind == "bool":
                params.append(Parameter.boolean(name, default))
            else:
                _require_fields(name, entry, ("labels",))
                params.append(Parameter.enum(name, entry["labels"], default))
        except (TypeError, ValueError) as exc:
            if isinstance(exc, SpaceError):
                raise
            raise SpaceError(f"space file: parameter {name!r}: {exc}") from exc
    return ParameterSpace(params=tuple(params))


def _require_fields(name: str, entry: dict, fields: tuple[str, ...]) -> None:
    for f in fields:
        if f not in entry:
            raise SpaceError(f"space file: parameter {name!r}: missing field {f!r}")


def space_to_json(space: ParameterSpace) -> dict:
    entries = []
    for p in space.params:
        e: dict[str, Any] = {"name": p.name, "kind": p.kind}
        if p.kind in ("real", "int"):
            e["lo"], e["hi"] = p.lo, p.hi
        elif p.kind == "enum":
            e["labels"] = list(p.labels)
        if p.default is not None:
            e["default"] = p.default
        entries.append(e)
    return {"format_version": SPACE_FORMAT_VERSION, "parameters": entries}


def load_space(path: str | Path) -> ParameterSpace:
    """Load a space file; parse errors report parameter name and field."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpaceError(f"space file {path}: invalid JSON: {exc}") from exc
    return space_from_json(obj)


def save_space(space: ParameterSpace, path: str | Path) -> None:
    Path(path).write_text(json.dumps(space_to_json(space), indent=2) + "\n", encoding="utf-8")
