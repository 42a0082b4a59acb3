"""Mixed continuous/categorical input domains.

A ``FeatureSpace`` declares an ordered list of features, each either
continuous with bounds or categorical with a fixed level set. Points are
plain tuples of raw values in declaration order. Internally, continuous
values are min-max scaled to [0, 1] and categorical values are replaced
by their level index; all user-facing output is in raw units.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ValidationError
from .rng import STREAM_SAMPLING, make_rng

Point = tuple  # per-feature raw values: float for continuous, str label for categorical

CONTINUOUS = "continuous"
CATEGORICAL = "categorical"


@dataclass(frozen=True)
class FeatureSpec:
    """One input feature: continuous with bounds, or categorical with levels."""

    name: str
    kind: str
    lower: float | None = None
    upper: float | None = None
    levels: tuple[str, ...] | None = None

    def __post_init__(self):
        problems = []
        if not self.name:
            problems.append("feature name must be non-empty")
        if self.kind == CONTINUOUS:
            if self.lower is None or self.upper is None:
                problems.append(f"{self.name}: continuous feature needs lower and upper")
            elif not self.lower < self.upper:
                problems.append(f"{self.name}: lower ({self.lower}) must be < upper ({self.upper})")
        elif self.kind == CATEGORICAL:
            if not self.levels or len(self.levels) < 2:
                problems.append(f"{self.name}: categorical feature needs >= 2 levels")
            elif len(set(self.levels)) != len(self.levels):
                problems.append(f"{self.name}: categorical levels must be distinct")
        else:
            problems.append(f"{self.name}: unknown feature kind {self.kind!r}")
        if problems:
            raise ValidationError("invalid feature spec", problems)

    @staticmethod
    def continuous(name: str, lower: float, upper: float) -> "FeatureSpec":
        return FeatureSpec(name, CONTINUOUS, lower=float(lower), upper=float(upper))

    @staticmethod
    def categorical(name: str, levels: Iterable[str]) -> "FeatureSpec":
        return FeatureSpec(name, CATEGORICAL, levels=tuple(str(v) for v in levels))

    @property
    def is_categorical(self) -> bool:
        return self.kind == CATEGORICAL

    @property
    def n_levels(self) -> int:
        return len(self.levels) if self.levels else 0


@dataclass(frozen=True)
class FeatureSpace:
    """Ordered, immutable declaration of the input domain."""

    specs: tuple[FeatureSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "specs", tuple(self.specs))
        names = [s.name for s in self.specs]
        if len(set(names)) != len(names):
            raise ValidationError("feature names must be unique")
        if not self.specs:
            raise ValidationError("feature space must declare at least one feature")

    @property
    def m(self) -> int:
        return len(self.specs)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.specs)

    @cached_property
    def continuous_indices(self) -> tuple[int, ...]:
        return tuple(i for i, s in enumerate(self.specs) if not s.is_categorical)

    @cached_property
    def categorical_indices(self) -> tuple[int, ...]:
        return tuple(i for i, s in enumerate(self.specs) if s.is_categorical)

    @property
    def all_continuous(self) -> bool:
        return not self.categorical_indices

    def index(self, name: str) -> int:
        for i, s in enumerate(self.specs):
            if s.name == name:
                return i
        raise ValidationError(f"unknown feature {name!r}")

    def spec(self, name: str) -> FeatureSpec:
        return self.specs[self.index(name)]

    # -- validation ---------------------------------------------------------

    def validate(self, point: Sequence) -> list[str]:
        """Itemized violations for a candidate point; empty list means valid."""
        if len(point) != self.m:
            return [f"point has {len(point)} values, space declares {self.m}"]
        violations = []
        for spec, value in zip(self.specs, point):
            if spec.is_categorical:
                if str(value) not in spec.levels:
                    violations.append(f"{spec.name}: unknown level {value!r}")
            else:
                try:
                    v = float(value)
                except (TypeError, ValueError):
                    violations.append(f"{spec.name}: not a number: {value!r}")
                    continue
                if not (spec.lower <= v <= spec.upper):
                    violations.append(
                        f"{spec.name}: value {v} out of bounds [{spec.lower}, {spec.upper}]"
                    )
        return violations

    def require_valid(self, point: Sequence) -> None:
        violations = self.validate(point)
        if violations:
            raise ValidationError("invalid point", violations)

    # -- encoding -----------------------------------------------------------

    def encode(self, point: Sequence) -> np.ndarray:
        """Numeric vector: continuous min-max scaled to [0,1], categorical as level index."""
        self.require_valid(point)
        out = np.empty(self.m)
        for i, (spec, value) in enumerate(zip(self.specs, point)):
            if spec.is_categorical:
                out[i] = spec.levels.index(str(value))
            else:
                out[i] = (float(value) - spec.lower) / (spec.upper - spec.lower)
        return out

    def encode_many(self, points: Iterable[Sequence]) -> np.ndarray:
        rows = [self.encode(p) for p in points]
        if not rows:
            return np.empty((0, self.m))
        return np.vstack(rows)

    def decode(self, encoded: Sequence[float]) -> Point:
        """Inverse of :meth:`encode`, restoring raw units and level labels."""
        if len(encoded) != self.m:
            raise ValidationError(f"encoded vector has {len(encoded)} values, expected {self.m}")
        values = []
        for spec, v in zip(self.specs, encoded):
            if spec.is_categorical:
                idx = int(round(float(v)))
                if not 0 <= idx < spec.n_levels:
                    raise ValidationError(f"{spec.name}: level index {v} out of range")
                values.append(spec.levels[idx])
            else:
                values.append(spec.lower + float(v) * (spec.upper - spec.lower))
        return tuple(values)

    def center_reference(self, categorical_choice: Mapping[str, str] | None = None) -> Point:
        """Domain-center point: continuous midpoints, categorical features at an
        explicit override or their first declared level."""
        overrides = dict(categorical_choice or {})
        for name in overrides:
            if not self.spec(name).is_categorical:
                raise ValidationError(f"override names non-categorical feature {name!r}")
        values = []
        for spec in self.specs:
            if spec.is_categorical:
                level = overrides.get(spec.name, spec.levels[0])
                if level not in spec.levels:
                    raise ValidationError(f"{spec.name}: unknown level {level!r}")
                values.append(level)
            else:
                values.append(0.5 * (spec.lower + spec.upper))
        return tuple(values)

    # -- serialization ------------------------------------------------------

    def to_json_obj(self) -> list[dict]:
        out = []
        for s in self.specs:
            if s.is_categorical:
                out.append({"name": s.name, "type": CATEGORICAL, "levels": list(s.levels)})
            else:
                out.append({"name": s.name, "type": CONTINUOUS, "lower": s.lower, "upper": s.upper})
        return out

    @staticmethod
    def from_json_obj(obj: Sequence[Mapping]) -> "FeatureSpace":
        specs = []
        for entry in obj:
            kind = entry.get("type")
            if kind == CONTINUOUS:
                specs.append(FeatureSpec.continuous(entry["name"], entry["lower"], entry["upper"]))
            elif kind == CATEGORICAL:
                specs.append(FeatureSpec.categorical(entry["name"], entry["levels"]))
            else:
                raise ValidationError(f"feature {entry.get('name')!r}: unknown type {kind!r}")
        return FeatureSpace(tuple(specs))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_obj(), fh, indent=2)
            fh.write("\n")

    @staticmethod
    def load(path) -> "FeatureSpace":
        with open(path, encoding="utf-8") as fh:
            try:
                obj = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"space file {path}: invalid JSON ({exc})") from exc
        return FeatureSpace.from_json_obj(obj)


def lhs_sample(space: FeatureSpace, n: int, seed: int) -> list[Point]:
    """Latin hypercube sample of ``n`` points.

    Each continuous axis is cut into ``n`` equal strata holding exactly one
    point (uniform jitter within the stratum); categorical features are drawn
    uniformly over their levels. Pure function of (space, n, seed).
    """
    if n < 1:
        raise ValidationError("lhs_sample requires n >= 1")
    rng = make_rng(seed, STREAM_SAMPLING)
    columns = []
    for spec in space.specs:
        if spec.is_categorical:
            idx = rng.integers(0, spec.n_levels, size=n)
            columns.append([spec.levels[i] for i in idx])
        else:
            strata = rng.permutation(n)
            u = (strata + rng.uniform(size=n)) / n
            columns.append(list(spec.lower + u * (spec.upper - spec.lower)))
    return [tuple(col[i] for col in columns) for i in range(n)]


RESPONSE_COLUMN = "response"


@dataclass(frozen=True)
class Dataset:
    """Points with scalar responses, all valid in one feature space."""

    space: FeatureSpace
    points: tuple[Point, ...]
    responses: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(tuple(p) for p in self.points))
        responses = np.asarray(self.responses, dtype=float)
        responses.flags.writeable = False
        object.__setattr__(self, "responses", responses)
        if len(self.points) != len(responses):
            raise ValidationError(
                f"{len(self.points)} points but {len(responses)} responses"
            )
        for i, p in enumerate(self.points):
            violations = self.space.validate(p)
            if violations:
                raise ValidationError(f"row {i}: invalid point", violations)

    def __len__(self) -> int:
        return len(self.points)

    @cached_property
    def encoded(self) -> np.ndarray:
        X = self.space.encode_many(self.points)
        X.flags.writeable = False
        return X

    def subset(self, indices: Sequence[int]) -> "Dataset":
        return Dataset(
            self.space,
            tuple(self.points[i] for i in indices),
            self.responses[list(indices)],
        )

    def restrict(self, feature_names: Sequence[str]) -> "Dataset":
        """Project onto a subset of features, keeping responses (for per-feature models)."""
        keep = [self.space.index(name) for name in feature_names]
        sub_space = FeatureSpace(tuple(self.space.specs[i] for i in keep))
        pts = tuple(tuple(p[i] for i in keep) for p in self.points)
        return Dataset(sub_space, pts, self.responses)

    # -- CSV ------------------------------------------------------------------

    def csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(list(self.space.names) + [RESPONSE_COLUMN])
        for p, y in zip(self.points, self.responses):
            writer.writerow([_cell(v) for v in p] + [repr(float(y))])
        return buf.getvalue()

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.csv_text())

    @staticmethod
    def from_csv_text(space: FeatureSpace, text: str, source: str = "<string>") -> "Dataset":
        reader = csv.reader(io.StringIO(text))
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{source}: empty CSV") from None
        expected = list(space.names) + [RESPONSE_COLUMN]
        if header != expected:
            raise ValidationError(
                f"{source}: header mismatch", [f"expected {expected}", f"found {header}"]
            )
        points, responses, problems = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(expected):
                problems.append(f"{source}:{lineno}: expected {len(expected)} cells, found {len(row)}")
                continue
            values = []
            for spec, cell in zip(space.specs, row):
                if spec.is_categorical:
                    values.append(cell)
                else:
                    try:
                        values.append(float(cell))
                    except ValueError:
                        problems.append(f"{source}:{lineno}: column {spec.name!r}: not a number: {cell!r}")
                        values.append(None)
            try:
                responses.append(float(row[-1]))
            except ValueError:
                problems.append(f"{source}:{lineno}: column 'response': not a number: {row[-1]!r}")
                responses.append(float("nan"))
            point = tuple(values)
            if None not in values:
                bad = space.validate(point)
                problems.extend(f"{source}:{lineno}: {b}" for b in bad)
            points.append(point)
        if problems:
            raise ValidationError(f"{source}: invalid dataset", problems)
        return Dataset(space, tuple(points), np.array(responses))

    @staticmethod
    def from_csv(space: FeatureSpace, path) -> "Dataset":
        with open(path, encoding="utf-8") as fh:
            return Dataset.from_csv_text(space, fh.read(), source=str(path))


def _cell(value) -> str:
    if isinstance(value, str):
        return value
    return repr(float(value))
