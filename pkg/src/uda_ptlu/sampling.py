"""Random and exhaustive generation of UDA instances and (m, n)-samples."""

from __future__ import annotations

import itertools
import math
from collections.abc import Iterator
from dataclasses import dataclass

import numpy as np

from .domain import ClassEntry, Classifier, ClassifierFamily, Domain, FiniteDistribution, LabelSet, Sample, UDAClass
from .errors import TooLarge

ENUMERATION_LIMIT = 10**6


@dataclass(frozen=True)
class RngSpec:
    """Seed plus per-trial stream index.

    Streams are derived with ``SeedSequence(seed, spawn_key=(stream,))`` so a
    trial's draws depend only on (seed, stream), never on scheduling.
    """

    seed: int = 0
    stream: int = 0

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=(self.stream,))))

    def substream(self, stream: int) -> RngSpec:
        return RngSpec(self.seed, stream)

    def child(self, index: int) -> RngSpec:
        """A seed for a nested family of streams, disjoint from this one's."""
        return RngSpec(int(np.random.SeedSequence(self.seed, spawn_key=(self.stream, index)).generate_state(1, np.uint64)[0]), 0)


@dataclass(frozen=True)
class UDAInstance:
    p: FiniteDistribution
    q: FiniteDistribution
    f: Classifier


def _as_generator(rng: RngSpec | np.random.Generator) -> np.random.Generator:
    return rng.generator() if isinstance(rng, RngSpec) else rng


def draw_instance(pi: UDAClass, rng: RngSpec | np.random.Generator) -> UDAInstance:
    """Pick an entry proportionally to its weight, then f from that entry's prior."""
    return draw_instance_indexed(pi, rng)[1]


def draw_instance_indexed(pi: UDAClass, rng: RngSpec | np.random.Generator) -> tuple[int, UDAInstance]:
    gen = _as_generator(rng)
    e = int(gen.choice(len(pi.entries), p=pi.weights))
    prior = pi.prior_matrix[e]
    j = int(gen.choice(len(prior), p=prior / prior.sum()))
    entry = pi.entries[e]
    return e, UDAInstance(entry.p, entry.q, pi.family[j])


def draw_sample(inst: UDAInstance, m: int, n: int, rng: RngSpec | np.random.Generator) -> Sample:
    if m < 0 or n < 0:
        raise ValueError("sample sizes must be non-negative")
    gen = _as_generator(rng)
    xs = gen.choice(inst.p.domain.size, size=m, p=inst.p.probs)
    xt = gen.choice(inst.q.domain.size, size=n, p=inst.q.probs)
    return Sample(xs, xt, inst.f.table[xs])


def enumeration_size(inst: UDAInstance, m: int, n: int) -> int:
    return len(inst.p.support) ** m * len(inst.q.support) ** n


def enumerate_samples(inst: UDAInstance, m: int, n: int) -> Iterator[tuple[Sample, float]]:
    """Every (m, n)-sample with positive probability, with that probability.

    Ordered lexicographically by (xs, xt) over the sorted supports.
    """
    size = enumeration_size(inst, m, n)
    if size > ENUMERATION_LIMIT:
        raise TooLarge(f"{size} samples exceeds enumeration limit {ENUMERATION_LIMIT}")
    sp, sq = inst.p.support, inst.q.support
    pp, pq = inst.p.probs, inst.q.probs
    table = inst.f.table
    for xs in itertools.product(sp, repeat=m):
        prob_s = math.prod(pp[x] for x in xs)
        xs_arr = np.array(xs, dtype=np.int64)
        ys = table[xs_arr]
        for xt in itertools.product(sq, repeat=n):
            yield Sample(xs_arr, np.array(xt, dtype=np.int64), ys), prob_s * math.prod(pq[x] for x in xt)


def _random_masses(gen: np.random.Generator, size: int, support_size: int) -> np.ndarray:
    probs = np.zeros(size)
    support = gen.choice(size, size=support_size, replace=False)
    probs[support] = gen.dirichlet(np.ones(support_size))
    return probs


def random_class(
    rng: RngSpec | np.random.Generator,
    n_points: int = 8,
    n_classifiers: int = 16,
    k: int = 2,
    n_entries: int = 3,
    repeat_pair: float = 0.3,
) -> UDAClass:
    """A random finite UDA class on a 1-D grid domain.

    Classifier tables are distinct (capped at k ** n_points). Each entry
    gets random-support Dirichlet masses for p and q and a random-support
    Dirichlet prior; with probability ``repeat_pair`` an entry reuses an
    earlier entry's (p, q) pair so that pair merging gets exercised.
    """
    gen = _as_generator(rng)
    dom = Domain(n_points, "euclidean", coords=np.arange(n_points, dtype=float)[:, None])
    target = min(n_classifiers, k**n_points)
    tables = np.empty((0, n_points), dtype=np.int64)
    while len(tables) < target:
        fresh = gen.integers(0, k, size=(target, n_points))
        tables = np.unique(np.concatenate([tables, fresh]), axis=0)
    tables = gen.permutation(tables)[:target]
    names = tuple(f"h{i}" for i in range(target))
    family = ClassifierFamily(dom, LabelSet.of_size(k), names, tables)
    weights = gen.dirichlet(np.ones(n_entries))
    entries: list[ClassEntry] = []
    for w in weights:
        if entries and gen.random() < repeat_pair:
            reused = entries[int(gen.integers(len(entries)))]
            p, q = reused.p, reused.q
        else:
            p = FiniteDistribution(dom, _random_masses(gen, n_points, int(gen.integers(1, n_points + 1))))
            q = FiniteDistribution(dom, _random_masses(gen, n_points, int(gen.integers(1, n_points + 1))))
        prior = _random_masses(gen, target, int(gen.integers(1, target + 1)))
        entries.append(ClassEntry(float(w), p, q, {names[i]: float(prior[i]) for i in np.flatnonzero(prior)}))
    return UDAClass(family, tuple(entries))
