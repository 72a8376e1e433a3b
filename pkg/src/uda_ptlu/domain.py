"""Immutable data model: domains, distributions, classifiers, UDA classes, samples.

Everything is finite. Arrays stored on these objects are marked read-only,
so values can be shared freely once constructed.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import Issue, ValidationError

PROB_TOL = 1e-9
DUST = 1e-12
METRICS = ("euclidean", "angular-degrees", "discrete")


def _readonly(values: Any, dtype: Any) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Domain:
    """Finite input space with point ids ``0..size-1``.

    ``coords`` has shape (size, d) for euclidean domains; ``angles`` holds
    degrees in [0, 360) for angular domains. Either may also be attached to
    a discrete domain for display purposes.
    """

    size: int
    metric: str = "discrete"
    coords: np.ndarray | None = None
    angles: np.ndarray | None = None

    def __post_init__(self):
        issues = []
        if self.size < 1:
            issues.append(Issue("ShapeMismatch", "domain must contain at least one point"))
        if self.metric not in METRICS:
            issues.append(Issue("BadValue", f"unknown metric {self.metric!r}"))
        if self.coords is not None:
            coords = np.array(self.coords, dtype=float)
            if coords.ndim == 1:
                coords = coords[:, None]
            if coords.shape[0] != self.size or coords.shape[1] < 1:
                issues.append(Issue("ShapeMismatch", f"coords shape {coords.shape} for {self.size} points"))
            coords.setflags(write=False)
            object.__setattr__(self, "coords", coords)
        elif self.metric == "euclidean":
            issues.append(Issue("ShapeMismatch", "euclidean domain requires coordinates"))
        if self.angles is not None:
            angles = _readonly(self.angles, float)
            if angles.shape != (self.size,):
                issues.append(Issue("ShapeMismatch", f"{angles.shape[0]} angles for {self.size} points"))
            elif np.any((angles < 0) | (angles >= 360)):
                issues.append(Issue("BadValue", "angles must lie in [0, 360)"))
            object.__setattr__(self, "angles", angles)
        elif self.metric == "angular-degrees":
            issues.append(Issue("ShapeMismatch", "angular domain requires an angle for every point"))
        if issues:
            raise ValidationError(issues)

    @property
    def ids(self) -> range:
        return range(self.size)

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        if not isinstance(other, Domain):
            return NotImplemented
        return (
            self.size == other.size
            and self.metric == other.metric
            and _same_optional(self.coords, other.coords)
            and _same_optional(self.angles, other.angles)
        )

    def __hash__(self) -> int:
        return hash((self.size, self.metric))


def _same_optional(a: np.ndarray | None, b: np.ndarray | None) -> bool:
    if a is None or b is None:
        return a is None and b is None
    return a.shape == b.shape and bool(np.array_equal(a, b))


@dataclass(frozen=True)
class LabelSet:
    labels: tuple[str, ...]

    def __post_init__(self):
        labels = tuple(str(x) for x in self.labels)
        object.__setattr__(self, "labels", labels)
        issues = []
        if len(labels) < 2:
            issues.append(Issue("ShapeMismatch", "need at least two labels"))
        if len(set(labels)) != len(labels):
            issues.append(Issue("BadValue", "label names must be unique"))
        if issues:
            raise ValidationError(issues)

    @property
    def k(self) -> int:
        return len(self.labels)

    @classmethod
    def binary(cls) -> LabelSet:
        return cls(("0", "1"))

    @classmethod
    def of_size(cls, k: int) -> LabelSet:
        return cls(tuple(str(i) for i in range(k)))


@dataclass(frozen=True, eq=False)
class FiniteDistribution:
    """Probability vector over the points of a domain.

    Masses below ``DUST`` are clamped to zero so supports are exact sets.
    """

    domain: Domain
    probs: np.ndarray

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float)
        issues = _check_mass_vector(probs, self.domain.size, "distribution")
        if issues:
            raise ValidationError(issues)
        probs[probs < DUST] = 0.0
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        support = np.flatnonzero(probs)
        support.setflags(write=False)
        object.__setattr__(self, "_support", support)

    @property
    def support(self) -> np.ndarray:
        """Sorted ids with positive mass."""
        return self._support

    def __getitem__(self, point_id: int) -> float:
        return float(self.probs[point_id])

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        if not isinstance(other, FiniteDistribution):
            return NotImplemented
        return self.domain == other.domain and bool(np.array_equal(self.probs, other.probs))

    def __hash__(self) -> int:
        return hash(self.probs.tobytes())

    @classmethod
    def from_sparse(cls, domain: Domain, masses: Mapping[int, float]) -> FiniteDistribution:
        probs = np.zeros(domain.size)
        for point_id, mass in masses.items():
            probs[int(point_id)] += mass
        return cls(domain, probs)

    @classmethod
    def uniform_on(cls, domain: Domain, ids: Iterable[int]) -> FiniteDistribution:
        ids = np.unique(np.fromiter(ids, dtype=np.int64))
        probs = np.zeros(domain.size)
        probs[ids] = 1.0 / len(ids)
        return cls(domain, probs)

    @classmethod
    def point_mass(cls, domain: Domain, point_id: int) -> FiniteDistribution:
        return cls.from_sparse(domain, {point_id: 1.0})


def _check_mass_vector(probs: np.ndarray, size: int, what: str) -> list[Issue]:
    if probs.shape != (size,):
        return [Issue("ShapeMismatch", f"{what} has shape {probs.shape}, expected ({size},)")]
    issues = []
    if not np.all(np.isfinite(probs)) or np.any(probs < 0):
        issues.append(Issue("NonNormalized", f"{what} has negative or non-finite masses"))
    total = float(np.sum(probs))
    if abs(total - 1.0) > PROB_TOL:
        issues.append(Issue("NonNormalized", f"{what} sums to {total!r}"))
    if not np.any(probs >= DUST):
        issues.append(Issue("EmptySupport", f"{what} has empty support"))
    return issues


@dataclass(frozen=True, eq=False)
class Classifier:
    """Hard classifier given by a label-index table over the domain."""

    name: str
    table: np.ndarray

    def __post_init__(self):
        table = _readonly(self.table, np.int64)
        if table.ndim != 1 or np.any(table < 0):
            raise ValidationError([Issue("ShapeMismatch", f"bad label table for {self.name!r}")])
        object.__setattr__(self, "table", table)

    def __call__(self, xs: Any) -> np.ndarray:
        return self.table[np.asarray(xs, dtype=np.int64)]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Classifier):
            return NotImplemented
        return self.name == other.name and bool(np.array_equal(self.table, other.table))

    def __hash__(self) -> int:
        return hash((self.name, self.table.tobytes()))


@dataclass(frozen=True)
class PartialTable:
    """A label table defined only on ``ids`` (e.g. the restriction f_p)."""

    ids: tuple[int, ...]
    labels: tuple[int, ...]

    def as_dict(self) -> dict[int, int]:
        return dict(zip(self.ids, self.labels))


def restrict(f: Classifier, p: FiniteDistribution) -> PartialTable:
    """Restriction of ``f`` to the support of ``p``."""
    ids = p.support
    return PartialTable(tuple(int(i) for i in ids), tuple(int(y) for y in f.table[ids]))


@dataclass(frozen=True, eq=False)
class ClassifierFamily:
    """Ordered finite family of classifiers sharing one domain and label set.

    Tables are stored as one (|family|, |domain|) matrix; ``family[i]`` or
    ``family.get(name)`` builds the individual ``Classifier``.
    """

    domain: Domain
    labels: LabelSet
    names: tuple[str, ...]
    tables: np.ndarray

    def __post_init__(self):
        names = tuple(str(n) for n in self.names)
        object.__setattr__(self, "names", names)
        dtype = np.int8 if self.labels.k <= 127 else np.int32
        tables = np.array(self.tables, dtype=dtype)
        issues = []
        if tables.ndim != 2 or tables.shape != (len(names), self.domain.size):
            issues.append(
                Issue("ShapeMismatch", f"tables shape {tables.shape} vs {len(names)} classifiers x {self.domain.size} points")
            )
        elif tables.size and (tables.min() < 0 or tables.max() >= self.labels.k):
            issues.append(Issue("BadValue", f"label index outside 0..{self.labels.k - 1}"))
        if len(set(names)) != len(names):
            issues.append(Issue("BadValue", "classifier ids must be unique"))
        if not names:
            issues.append(Issue("EmptySupport", "family is empty"))
        if issues:
            raise ValidationError(issues)
        tables.setflags(write=False)
        object.__setattr__(self, "tables", tables)
        object.__setattr__(self, "_index", {n: i for i, n in enumerate(names)})

    def __len__(self) -> int:
        return len(self.names)

    def __getitem__(self, i: int) -> Classifier:
        return Classifier(self.names[i], self.tables[i])

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def index(self, name: str) -> int:
        return self._index[name]

    def __contains__(self, name: object) -> bool:
        return name in self._index

    def get(self, name: str) -> Classifier:
        return self[self.index(name)]

    @property
    def k(self) -> int:
        return self.labels.k

    @classmethod
    def from_classifiers(cls, domain: Domain, labels: LabelSet, classifiers: Sequence[Classifier]) -> ClassifierFamily:
        return cls(domain, labels, tuple(c.name for c in classifiers), np.stack([c.table for c in classifiers]))

    @classmethod
    def all_functions(cls, domain: Domain, labels: LabelSet, limit: int = 1 << 16) -> ClassifierFamily:
        """Every map domain -> labels (k^N classifiers), named by their table."""
        count = labels.k**domain.size
        if count > limit:
            raise ValidationError([Issue("ShapeMismatch", f"{count} classifiers exceeds limit {limit}")])
        codes = np.arange(count)
        tables = np.empty((count, domain.size), dtype=np.int64)
        for j in range(domain.size):
            tables[:, j] = codes % labels.k
            codes = codes // labels.k
        names = tuple("g" + "".join(str(v) for v in row) for row in tables)
        return cls(domain, labels, names, tables)


@dataclass(frozen=True, eq=False)
class ClassEntry:
    weight: float
    p: FiniteDistribution
    q: FiniteDistribution
    prior_f: Mapping[str, float]


@dataclass(frozen=True, eq=False)
class UDAClass:
    """Finite-support distribution over (p, q, f) triples.

    Each entry is one (p, q) pair with weight pi_PQ(p, q) and a conditional
    prior over classifier names. ``prior_matrix[e]`` is that prior as a
    vector over ``family``.
    """

    family: ClassifierFamily
    entries: tuple[ClassEntry, ...]

    def __post_init__(self):
        entries = tuple(self.entries)
        object.__setattr__(self, "entries", entries)
        issues = []
        if not entries:
            issues.append(Issue("EmptySupport", "class has no entries"))
        weights = np.array([e.weight for e in entries], dtype=float)
        if entries:
            issues.extend(_check_mass_vector(weights, len(entries), "entry weights"))
        prior = np.zeros((len(entries), len(self.family)))
        for i, entry in enumerate(entries):
            for dist in (entry.p, entry.q):
                if dist.domain != self.family.domain:
                    issues.append(Issue("ShapeMismatch", f"entry {i}: distribution on a different domain"))
            for name, mass in entry.prior_f.items():
                if name not in self.family:
                    issues.append(Issue("DanglingClassifierId", f"entry {i}: unknown classifier {name!r}"))
                    continue
                prior[i, self.family.index(name)] += mass
            issues.extend(
                x for x in _check_mass_vector(prior[i], len(self.family), f"entry {i} prior_f")
                if x.kind != "ShapeMismatch"
            )
        if issues:
            raise ValidationError(issues)
        weights[weights < DUST] = 0.0
        prior[prior < DUST] = 0.0
        weights.setflags(write=False)
        prior.setflags(write=False)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "prior_matrix", prior)

    @property
    def domain(self) -> Domain:
        return self.family.domain

    @property
    def k(self) -> int:
        return self.family.k

    def active_entries(self) -> list[int]:
        return [i for i, w in enumerate(self.weights) if w > 0]

    def matching_entries(self, p: FiniteDistribution, q: FiniteDistribution) -> list[int]:
        """Indices of positive-weight entries whose pair is exactly (p, q)."""
        return [i for i in self.active_entries() if self.entries[i].p == p and self.entries[i].q == q]

    def conditional_prior(self, p: FiniteDistribution, q: FiniteDistribution) -> np.ndarray:
        """pi_{F|P,Q}(. | p, q) as a vector over the family (empty pair -> zeros)."""
        idx = self.matching_entries(p, q)
        if not idx:
            return np.zeros(len(self.family))
        mix = self.weights[idx] @ self.prior_matrix[idx]
        return mix / mix.sum()


@dataclass(frozen=True, eq=False)
class Sample:
    """(m, n)-sample: labeled source points, unlabeled target points."""

    xs: np.ndarray
    xt: np.ndarray
    ys: np.ndarray

    def __post_init__(self):
        xs = _readonly(self.xs, np.int64).reshape(-1)
        xt = _readonly(self.xt, np.int64).reshape(-1)
        ys = _readonly(self.ys, np.int64).reshape(-1)
        if xs.shape != ys.shape:
            raise ValidationError([Issue("ShapeMismatch", f"{xs.size} source points but {ys.size} labels")])
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "xt", xt)
        object.__setattr__(self, "ys", ys)

    @property
    def m(self) -> int:
        return int(self.xs.size)

    @property
    def n(self) -> int:
        return int(self.xt.size)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Sample):
            return NotImplemented
        return all(np.array_equal(a, b) for a, b in ((self.xs, other.xs), (self.xt, other.xt), (self.ys, other.ys)))

    def __hash__(self) -> int:
        return hash((self.xs.tobytes(), self.xt.tobytes(), self.ys.tobytes()))

    @classmethod
    def empty(cls) -> Sample:
        return cls(np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0, np.int64))


# ---------------------------------------------------------------------------
# Parsing of the JSON class description

_TOP_FIELDS = {"domain", "labels", "classifiers", "uda_class", "schema_version"}
_DOMAIN_FIELDS = {"metric", "points"}
_POINT_FIELDS = {"id", "coords", "angle"}
_CLASSIFIER_FIELDS = {"id", "table"}
_ENTRY_FIELDS = {"weight", "p", "q", "prior_f"}


def _unknown(obj: Mapping, allowed: set[str], where: str, issues: list[Issue]) -> None:
    for key in obj:
        if key not in allowed:
            issues.append(Issue("UnknownField", f"{where}: unexpected field {key!r}"))


def _parse_domain(raw: Any, issues: list[Issue]) -> Domain | None:
    if not isinstance(raw, Mapping):
        issues.append(Issue("ShapeMismatch", "domain must be an object"))
        return None
    _unknown(raw, _DOMAIN_FIELDS, "domain", issues)
    points = raw.get("points", [])
    metric = raw.get("metric", "discrete")
    ids = [pt.get("id") for pt in points]
    if ids != list(range(len(points))):
        issues.append(Issue("ShapeMismatch", "point ids must be 0..N-1 in order"))
        return None
    for pt in points:
        _unknown(pt, _POINT_FIELDS, f"point {pt.get('id')}", issues)
    coords = angles = None
    if any("coords" in pt for pt in points):
        coords = [pt.get("coords") for pt in points]
        if any(c is None for c in coords) or len({len(c) for c in coords}) != 1:
            issues.append(Issue("ShapeMismatch", "all points need coordinate vectors of one dimension"))
            return None
    if any("angle" in pt for pt in points):
        angles = [pt.get("angle") for pt in points]
        if any(a is None for a in angles):
            issues.append(Issue("ShapeMismatch", "every point needs an angle"))
            return None
    try:
        return Domain(len(points), metric, None if coords is None else np.array(coords, float), angles)
    except ValidationError as exc:
        issues.extend(exc.issues)
        return None


def _sparse_probs(raw: Any, size: int, where: str, issues: list[Issue]) -> np.ndarray | None:
    if not isinstance(raw, Mapping):
        issues.append(Issue("ShapeMismatch", f"{where} must be an id -> mass object"))
        return None
    probs = np.zeros(size)
    for key, mass in raw.items():
        try:
            point_id = int(key)
        except ValueError:
            issues.append(Issue("ShapeMismatch", f"{where}: bad point id {key!r}"))
            continue
        if not 0 <= point_id < size:
            issues.append(Issue("ShapeMismatch", f"{where}: point id {point_id} outside domain"))
            continue
        probs[point_id] += float(mass)
    found = _check_mass_vector(probs, size, where)
    issues.extend(found)
    return None if found else probs


def validate_class(raw: Mapping[str, Any]) -> UDAClass:
    """Build a UDAClass from its parsed JSON description.

    Collects every violated invariant and raises a single ValidationError
    listing all of them.
    """
    issues: list[Issue] = []
    if not isinstance(raw, Mapping):
        raise ValidationError([Issue("ShapeMismatch", "class description must be an object")])
    _unknown(raw, _TOP_FIELDS, "top level", issues)
    domain = _parse_domain(raw.get("domain"), issues)
    labels = None
    try:
        labels = LabelSet(tuple(raw.get("labels", ())))
    except ValidationError as exc:
        issues.extend(exc.issues)

    family = None
    raw_classifiers = raw.get("classifiers", [])
    for c in raw_classifiers:
        _unknown(c, _CLASSIFIER_FIELDS, f"classifier {c.get('id')!r}", issues)
    if domain is not None and labels is not None:
        try:
            family = ClassifierFamily(
                domain,
                labels,
                tuple(str(c.get("id")) for c in raw_classifiers),
                np.array([c.get("table", []) for c in raw_classifiers], dtype=np.int64).reshape(len(raw_classifiers), -1),
            )
        except (ValidationError, ValueError) as exc:
            issues.extend(getattr(exc, "issues", [Issue("ShapeMismatch", str(exc))]))

    raw_class = raw.get("uda_class", {})
    if not isinstance(raw_class, Mapping):
        raw_class = {}
        issues.append(Issue("ShapeMismatch", "uda_class must be an object"))
    _unknown(raw_class, {"entries"}, "uda_class", issues)
    raw_entries = raw_class.get("entries", [])
    weights = np.array([float(e.get("weight", math.nan)) for e in raw_entries])
    if raw_entries:
        issues.extend(_check_mass_vector(weights, len(raw_entries), "entry weights"))
    else:
        issues.append(Issue("EmptySupport", "class has no entries"))

    entries = []
    for i, e in enumerate(raw_entries):
        _unknown(e, _ENTRY_FIELDS, f"entry {i}", issues)
        prior = {str(k): float(v) for k, v in e.get("prior_f", {}).items()}
        if family is not None:
            for name in prior:
                if name not in family:
                    issues.append(Issue("DanglingClassifierId", f"entry {i}: unknown classifier {name!r}"))
        prior_vals = np.array(list(prior.values()), dtype=float)
        issues.extend(_check_mass_vector(prior_vals, len(prior_vals), f"entry {i} prior_f"))
        if domain is None:
            continue
        p = _sparse_probs(e.get("p"), domain.size, f"entry {i} p", issues)
        q = _sparse_probs(e.get("q"), domain.size, f"entry {i} q", issues)
        if p is not None and q is not None:
            entries.append(ClassEntry(float(e.get("weight")), FiniteDistribution(domain, p), FiniteDistribution(domain, q), prior))

    if issues:
        raise ValidationError(issues)
    return UDAClass(family, tuple(entries))
