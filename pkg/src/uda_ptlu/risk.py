"""Target risks, sample-wise risks, learners and the optimal learner."""

from __future__ import annotations

import hashlib
import math
from collections.abc import Iterator
from dataclasses import dataclass

import numpy as np

from .domain import Classifier, ClassifierFamily, FiniteDistribution, Sample, UDAClass
from .posterior import (
    Posterior,
    aggregate_matrix,
    consistent_mask,
    consistent_mask_infinite,
    harden_matrix,
    posterior_finite,
    posterior_infinite,
    restriction_groups,
)
from .sampling import RngSpec, UDAInstance, draw_instance, draw_sample, enumerate_samples


@dataclass(frozen=True, eq=False)
class Mixture:
    """A learner's output: a distribution over label tables.

    Tables need not belong to the working family; the hardened aggregate of
    a posterior is generally a new classifier.
    """

    tables: np.ndarray
    weights: np.ndarray

    @classmethod
    def single(cls, table: np.ndarray) -> Mixture:
        return cls(np.asarray(table)[None, :], np.ones(1))

    @classmethod
    def over_family(cls, family: ClassifierFamily, weights: np.ndarray) -> Mixture:
        return cls(family.tables, np.asarray(weights, dtype=float))

    def soft(self, query: np.ndarray, k: int) -> np.ndarray:
        return aggregate_matrix(self.tables, self.weights, query, k)


@dataclass(frozen=True)
class RiskReport:
    value: float
    method: str = "exact"
    standard_error: float | None = None
    trials: int | None = None

    def __post_init__(self):
        if (self.method == "monte-carlo") != (self.standard_error is not None):
            raise ValueError("standard_error is present exactly for monte-carlo reports")


class Learner:
    """Maps an (m, n)-sample, or an infinite-sample observation, to a Mixture."""

    name = "learner"

    def predict(self, s: Sample) -> Mixture:
        raise NotImplementedError

    def predict_infinite(self, p: FiniteDistribution, q: FiniteDistribution, f: Classifier) -> Mixture:
        raise NotImplementedError


class OptimalLearner(Learner):
    """Returns the hardened aggregate of the posterior with probability one."""

    name = "optimal"

    def __init__(self, pi: UDAClass):
        self.pi = pi

    def _harden(self, rho: Posterior) -> Mixture:
        fam = self.pi.family
        soft = aggregate_matrix(fam.tables, rho.probs, np.arange(fam.domain.size), fam.k)
        return Mixture.single(harden_matrix(soft))

    def predict(self, s):
        return self._harden(posterior_finite(self.pi, s))

    def predict_infinite(self, p, q, f):
        return self._harden(posterior_infinite(self.pi, p, q, f))


class GibbsLearner(Learner):
    """Samples its output from the posterior itself."""

    name = "gibbs"

    def __init__(self, pi: UDAClass):
        self.pi = pi

    def predict(self, s):
        return Mixture.over_family(self.pi.family, posterior_finite(self.pi, s).probs)

    def predict_infinite(self, p, q, f):
        return Mixture.over_family(self.pi.family, posterior_infinite(self.pi, p, q, f).probs)


class UniformConsistentLearner(Learner):
    """Uniform over the family members consistent with the labeled data.

    Falls back to the whole family when nothing is consistent.
    """

    name = "uniform-consistent"

    def __init__(self, family: ClassifierFamily):
        self.family = family

    def _uniform(self, mask: np.ndarray) -> Mixture:
        if not mask.any():
            mask = np.ones(len(self.family), dtype=bool)
        return Mixture.over_family(self.family, mask / mask.sum())

    def predict(self, s):
        return self._uniform(consistent_mask(self.family, s.xs, s.ys))

    def predict_infinite(self, p, q, f):
        return self._uniform(consistent_mask_infinite(self.family, p, f))


class FixedClassifierLearner(Learner):
    def __init__(self, g: Classifier):
        self.g = g
        self.name = f"fixed:{g.name}"

    def predict(self, s):
        return Mixture.single(self.g.table)

    def predict_infinite(self, p, q, f):
        return Mixture.single(self.g.table)


def _digest(*arrays: np.ndarray) -> int:
    h = hashlib.blake2b(digest_size=8)
    for a in arrays:
        h.update(np.ascontiguousarray(a, dtype="<f8" if a.dtype.kind == "f" else "<i8").tobytes())
        h.update(b"|")
    return int.from_bytes(h.digest(), "little")


class RandomLearner(Learner):
    """Dirichlet(1)-random distribution over the family, a deterministic
    function of (seed, observation)."""

    def __init__(self, family: ClassifierFamily, seed: int):
        self.family = family
        self.seed = seed
        self.name = f"random:{seed}"

    def _draw(self, key: int) -> Mixture:
        gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=(key,))))
        return Mixture.over_family(self.family, gen.dirichlet(np.ones(len(self.family))))

    def predict(self, s):
        return self._draw(_digest(s.xs, s.xt, s.ys))

    def predict_infinite(self, p, q, f):
        return self._draw(_digest(p.probs, q.probs, f.table[p.support]))


def learner_zoo(pi: UDAClass, random_seeds: int = 0, fixed: int | None = None) -> list[Learner]:
    """Optimal, Gibbs, uniform-consistent, fixed-classifier and random learners.

    ``fixed`` caps how many family members get a FixedClassifierLearner
    (default: all of them).
    """
    fam = pi.family
    zoo: list[Learner] = [OptimalLearner(pi), GibbsLearner(pi), UniformConsistentLearner(fam)]
    count = len(fam) if fixed is None else min(fixed, len(fam))
    zoo += [FixedClassifierLearner(fam[i]) for i in range(count)]
    zoo += [RandomLearner(fam, seed) for seed in range(random_seeds)]
    return zoo


# ---------------------------------------------------------------------------
# risk functionals


def target_risk(g: Classifier, q: FiniteDistribution, f: Classifier) -> float:
    """q-probability that g and f disagree."""
    return float(q.probs @ (g.table != f.table))


def mixture_target_risk(mix: Mixture, q: FiniteDistribution, f: Classifier) -> float:
    support = q.support
    disagree = mix.tables[:, support] != f.table[support]
    return float(mix.weights @ (disagree @ q.probs[support]))


def mixture_samplewise_risk(mix: Mixture, rho: Posterior, q: FiniteDistribution) -> float:
    """E_{x~q} Pr_{f~rho, g~mix}(f(x) != g(x)), with f and g independent."""
    support = q.support
    k = rho.family.k
    agree = np.sum(aggregate_matrix(rho.family.tables, rho.probs, support, k) * mix.soft(support, k), axis=1)
    return float(q.probs[support] @ (1.0 - agree))


def samplewise_risk(A: Learner, s: Sample, rho: Posterior, q: FiniteDistribution) -> float:
    return mixture_samplewise_risk(A.predict(s), rho, q)


def samplewise_risk_infinite(A: Learner, rho: Posterior, p: FiniteDistribution, q: FiniteDistribution, f: Classifier) -> float:
    return mixture_samplewise_risk(A.predict_infinite(p, q, f), rho, q)


def optimal_samplewise_risk(rho: Posterior, q: FiniteDistribution) -> float:
    """1 - E_{x~q} max_y rho^A(y|x): the risk of the optimal learner."""
    support = q.support
    soft = aggregate_matrix(rho.family.tables, rho.probs, support, rho.family.k)
    # row sums are 1; subtracting the max from the sum keeps unanimous points exactly 0
    return max(0.0, float(q.probs[support] @ (soft.sum(axis=1) - soft.max(axis=1))))


def _mc_report(values: list[float]) -> RiskReport:
    arr = np.asarray(values, dtype=float)
    se = float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else 0.0
    return RiskReport(math.fsum(arr) / arr.size, "monte-carlo", se, int(arr.size))


def expected_risk(
    A: Learner,
    inst: UDAInstance,
    m: int | None,
    n: int | None,
    mode: str = "exact",
    trials: int = 1000,
    rng: RngSpec = RngSpec(),
) -> RiskReport:
    """Risk of learner A on one instance, averaged over its (m, n)-samples.

    ``mode`` is "exact" (full enumeration), "mc" (``trials`` draws, stream t
    for trial t) or "infinite" (the learner sees (p, q, f_p)).
    """
    if mode == "infinite":
        return RiskReport(mixture_target_risk(A.predict_infinite(inst.p, inst.q, inst.f), inst.q, inst.f))
    if mode == "exact":
        terms = [prob * mixture_target_risk(A.predict(s), inst.q, inst.f) for s, prob in enumerate_samples(inst, m, n)]
        return RiskReport(math.fsum(terms))
    if mode == "mc":
        values = [
            mixture_target_risk(A.predict(draw_sample(inst, m, n, rng.substream(t))), inst.q, inst.f)
            for t in range(trials)
        ]
        return _mc_report(values)
    raise ValueError(f"unknown mode {mode!r}")


def _instances(pi: UDAClass) -> Iterator[tuple[int, float, UDAInstance]]:
    for e in pi.active_entries():
        entry = pi.entries[e]
        for j in np.flatnonzero(pi.prior_matrix[e]):
            yield e, float(pi.weights[e] * pi.prior_matrix[e, j]), UDAInstance(entry.p, entry.q, pi.family[j])


def overall_risk(
    A: Learner,
    pi: UDAClass,
    m: int | None,
    n: int | None,
    mode: str = "exact",
    trials: int = 1000,
    rng: RngSpec = RngSpec(),
) -> RiskReport:
    """Risk of learner A averaged over instances of the class and their samples."""
    if mode in ("exact", "infinite"):
        terms = [w * expected_risk(A, inst, m, n, mode).value for _, w, inst in _instances(pi)]
        return RiskReport(math.fsum(terms))
    if mode == "mc":
        values = []
        for t in range(trials):
            gen = rng.substream(t).generator()
            inst = draw_instance(pi, gen)
            values.append(mixture_target_risk(A.predict(draw_sample(inst, m, n, gen)), inst.q, inst.f))
        return _mc_report(values)
    raise ValueError(f"unknown mode {mode!r}")


def overall_risk_decomposed(
    A: Learner, pi: UDAClass, m: int | None, n: int | None, condition_on_pair: bool = True
) -> float:
    """Overall risk evaluated as E_pi E_s e(A; s, q) by exact enumeration.

    The sample-wise risk uses the posterior conditioned on the instance's
    (p, q) pair. With ``condition_on_pair=False`` it uses rho(.|s) alone,
    which gives the same total only when the class has a single pair.
    With m = n = None the infinite-sample form is used.
    """
    terms = []
    for e, w, inst in _instances(pi):
        if m is None:
            rho = posterior_infinite(pi, inst.p, inst.q, inst.f)
            terms.append(w * samplewise_risk_infinite(A, rho, inst.p, inst.q, inst.f))
            continue
        for s, prob in enumerate_samples(inst, m, n):
            rho = posterior_finite(pi, s, entry=e if condition_on_pair else None)
            terms.append(w * prob * samplewise_risk(A, s, rho, inst.q))
    return math.fsum(terms)


@dataclass(frozen=True, eq=False)
class InfiniteObservation:
    """One infinite-sample observation (p, q, f_p) of a class.

    ``mass`` is the class probability of producing it, i.e. the pair weight
    times the prior mass S of the classifiers sharing this restriction.
    """

    entries: tuple[int, ...]
    p: FiniteDistribution
    q: FiniteDistribution
    members: np.ndarray
    mass: float
    posterior: Posterior


def infinite_observations(pi: UDAClass) -> Iterator[InfiniteObservation]:
    """Distinct observations (p, q, f_p), grouped by the restriction f_p.

    Classifiers in one group share the posterior, so each posterior is
    computed once per group instead of once per classifier.
    """
    seen: list[int] = []
    for e in pi.active_entries():
        if e in seen:
            continue
        entry = pi.entries[e]
        pair = tuple(pi.matching_entries(entry.p, entry.q))
        seen.extend(pair)
        weight = float(pi.weights[list(pair)].sum())
        prior = pi.conditional_prior(entry.p, entry.q)
        active = np.flatnonzero(prior)
        groups = restriction_groups(pi.family, entry.p.support)
        active_groups = groups[active]
        for g in np.unique(active_groups):
            members = active[active_groups == g]
            probs = np.zeros(len(pi.family))
            probs[members] = prior[members]
            evidence = float(probs.sum())
            yield InfiniteObservation(
                pair, entry.p, entry.q, members, weight * evidence, Posterior(pi.family, probs / evidence, evidence)
            )


def optimal_overall_risk_infinite(pi: UDAClass) -> float:
    """R*_inf = E_{(p,q,f)~pi} e*(p, q, f_p)."""
    return max(0.0, math.fsum(obs.mass * optimal_samplewise_risk(obs.posterior, obs.q) for obs in infinite_observations(pi)))
