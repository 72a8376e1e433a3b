"""Consistent sets, exact posteriors over a classifier family, soft predictions."""

from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass

import numpy as np

from .domain import Classifier, ClassifierFamily, FiniteDistribution, Sample, UDAClass
from .errors import UnknownPair, ZeroEvidence

TIE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Posterior:
    """Distribution over the members of ``family`` (indexed like the family).

    ``evidence`` is the prior mass S of the conditioning set when the
    posterior comes from an infinite-sample observation.
    """

    family: ClassifierFamily
    probs: np.ndarray
    evidence: float | None = None

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float)
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.probs)

    def __getitem__(self, name: str) -> float:
        return float(self.probs[self.family.index(name)])

    def as_dict(self) -> dict[str, float]:
        return {self.family.names[i]: float(self.probs[i]) for i in self.support}

    @classmethod
    def point_mass(cls, family: ClassifierFamily, name: str) -> Posterior:
        probs = np.zeros(len(family))
        probs[family.index(name)] = 1.0
        return cls(family, probs)


@dataclass(frozen=True, eq=False)
class SoftPrediction:
    """Per-point label distributions: row i is the distribution at ``query[i]``."""

    query: np.ndarray
    probs: np.ndarray

    def at(self, point_id: int) -> np.ndarray:
        (row,) = np.flatnonzero(self.query == point_id)
        return self.probs[row]


def consistent_mask(family: ClassifierFamily, xs: Iterable[int], ys: Iterable[int]) -> np.ndarray:
    xs = np.asarray(xs, dtype=np.int64).reshape(-1)
    ys = np.asarray(ys, dtype=np.int64).reshape(-1)
    if xs.size != ys.size:
        raise ValueError("xs and ys differ in length")
    if xs.size == 0:
        return np.ones(len(family), dtype=bool)
    ux, first = np.unique(xs, return_index=True)
    uy = ys[first]
    # a point seen with two different labels admits no classifier
    if np.any(ys != uy[np.searchsorted(ux, xs)]):
        return np.zeros(len(family), dtype=bool)
    return np.all(family.tables[:, ux] == uy, axis=1)


def consistent_set(family: ClassifierFamily, xs: Iterable[int], ys: Iterable[int]) -> frozenset[str]:
    """Names of classifiers that label every xs[i] as ys[i]."""
    mask = consistent_mask(family, xs, ys)
    return frozenset(family.names[i] for i in np.flatnonzero(mask))


def consistent_mask_infinite(family: ClassifierFamily, p: FiniteDistribution, f: Classifier) -> np.ndarray:
    support = p.support
    return np.all(family.tables[:, support] == f.table[support], axis=1)


def consistent_set_infinite(family: ClassifierFamily, p: FiniteDistribution, f: Classifier) -> frozenset[str]:
    """Names of classifiers agreeing with f on the support of p."""
    mask = consistent_mask_infinite(family, p, f)
    return frozenset(family.names[i] for i in np.flatnonzero(mask))


def _log_likelihood(probs: np.ndarray, counts: np.ndarray) -> float:
    used = counts > 0
    if np.any(probs[used] == 0):
        return -np.inf
    return float(counts[used] @ np.log(probs[used]))


def entry_log_evidence(pi: UDAClass, s: Sample) -> np.ndarray:
    """log(weight * p^m(xs) * q^n(xt)) for every entry of the class."""
    size = pi.domain.size
    cs = np.bincount(s.xs, minlength=size)
    ct = np.bincount(s.xt, minlength=size)
    out = np.full(len(pi.entries), -np.inf)
    for i, entry in enumerate(pi.entries):
        if pi.weights[i] > 0:
            out[i] = np.log(pi.weights[i]) + _log_likelihood(entry.p.probs, cs) + _log_likelihood(entry.q.probs, ct)
    return out


def posterior_finite(pi: UDAClass, s: Sample, entry: int | None = None) -> Posterior:
    """Posterior over the family given an (m, n)-sample.

    With ``entry`` given, the posterior is additionally conditioned on the
    (p, q) pair of that entry, i.e. pi_{F | P, Q, S}.
    """
    logs = entry_log_evidence(pi, s)
    if entry is not None:
        ref = pi.entries[entry]
        keep = np.array([e.p == ref.p and e.q == ref.q for e in pi.entries])
        logs = np.where(keep, logs, -np.inf)
    if not np.any(np.isfinite(logs)):
        raise ZeroEvidence("sample has probability zero under every entry")
    scale = np.exp(logs - logs[np.isfinite(logs)].max())
    mass = (scale @ pi.prior_matrix) * consistent_mask(pi.family, s.xs, s.ys)
    total = mass.sum()
    if total <= 0:
        raise ZeroEvidence("no classifier with positive prior is consistent with the sample")
    return Posterior(pi.family, mass / total)


def posterior_infinite(pi: UDAClass, p: FiniteDistribution, q: FiniteDistribution, f: Classifier) -> Posterior:
    """Posterior given the infinite-sample observation (p, q, f_p)."""
    if not pi.matching_entries(p, q):
        raise UnknownPair("(p, q) is not a support pair of the class")
    prior = pi.conditional_prior(p, q)
    return _condition(prior, consistent_mask_infinite(pi.family, p, f), pi.family)


def _condition(prior: np.ndarray, mask: np.ndarray, family: ClassifierFamily) -> Posterior:
    mass = prior * mask
    evidence = float(mass.sum())
    if evidence <= 0:
        raise ZeroEvidence("prior puts no mass on classifiers consistent with f_p")
    return Posterior(family, mass / evidence, evidence=evidence)


def restriction_groups(family: ClassifierFamily, support: np.ndarray) -> np.ndarray:
    """Group label per classifier: equal labels <=> equal restriction to ``support``."""
    if len(support) == 0:
        return np.zeros(len(family), dtype=np.int64)
    _, inverse = np.unique(np.ascontiguousarray(family.tables[:, support]), axis=0, return_inverse=True)
    return inverse.reshape(-1)


def aggregate_matrix(tables: np.ndarray, weights: np.ndarray, query: np.ndarray, k: int) -> np.ndarray:
    """(|query|, k) matrix of Pr_{g ~ weights}(g(x) = y)."""
    used = np.flatnonzero(weights)
    sub = tables[np.ix_(used, query)]
    w = weights[used]
    out = np.empty((len(query), k))
    for y in range(k):
        out[:, y] = w @ (sub == y)
    return np.clip(out, 0.0, 1.0)


def aggregate(rho: Posterior, query: Iterable[int] | None = None) -> SoftPrediction:
    """Aggregated soft classifier: label distribution of g(x) for g ~ rho."""
    if query is None:
        query = np.arange(rho.family.domain.size)
    query = np.asarray(list(query) if not isinstance(query, np.ndarray) else query, dtype=np.int64)
    return SoftPrediction(query, aggregate_matrix(rho.family.tables, rho.probs, query, rho.family.k))


def harden_matrix(probs: np.ndarray) -> np.ndarray:
    # lowest label index among (numerically) tied maxima
    top = probs.max(axis=1, keepdims=True)
    return np.argmax(probs >= top - TIE_TOL, axis=1)


def harden(soft: SoftPrediction) -> dict[int, int]:
    """Argmax label per query point, ties to the lowest label index."""
    labels = harden_matrix(soft.probs)
    return {int(x): int(y) for x, y in zip(soft.query, labels)}
