import math

import numpy as np
import pytest

from uda_ptlu.domain import ClassEntry, ClassifierFamily, Domain, FiniteDistribution, LabelSet, Sample, UDAClass
from uda_ptlu.errors import TooLarge
from uda_ptlu.sampling import (
    RngSpec,
    UDAInstance,
    draw_instance,
    draw_instance_indexed,
    draw_sample,
    enumerate_samples,
    random_class,
)


def _family(n=4):
    return ClassifierFamily.all_functions(Domain(n), LabelSet.binary())


def test_degenerate_class_always_gives_the_same_instance():
    fam = _family()
    p = FiniteDistribution.uniform_on(fam.domain, [0, 1])
    pi = UDAClass(fam, (ClassEntry(1.0, p, p, {"g0101": 1.0}),))
    for stream in range(20):
        inst = draw_instance(pi, RngSpec(3, stream))
        assert inst.f.name == "g0101" and inst.p == p


def test_entry_frequencies_match_weights():
    fam = _family()
    p = FiniteDistribution.uniform_on(fam.domain, [0])
    q = FiniteDistribution.uniform_on(fam.domain, [1])
    pi = UDAClass(fam, (ClassEntry(0.5, p, q, {"g0000": 1.0}), ClassEntry(0.5, q, p, {"g0000": 1.0})))
    gen = RngSpec(1).generator()
    hits = sum(draw_instance_indexed(pi, gen)[0] == 0 for _ in range(100_000))
    assert abs(hits / 100_000 - 0.5) < 0.01


def test_rng_spec_is_deterministic_and_streams_differ():
    a = RngSpec(42, 7).generator().random(5)
    b = RngSpec(42, 7).generator().random(5)
    c = RngSpec(42, 8).generator().random(5)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    assert RngSpec(42, 7).child(0) != RngSpec(42, 7).child(1)


def test_empty_sample():
    fam = _family()
    p = FiniteDistribution.uniform_on(fam.domain, range(4))
    s = draw_sample(UDAInstance(p, p, fam[0]), 0, 0, RngSpec())
    assert s == Sample.empty() and s.m == s.n == 0


def test_point_mass_source():
    fam = _family()
    p = FiniteDistribution.point_mass(fam.domain, 3)
    f = fam.get("g0001")
    s = draw_sample(UDAInstance(p, p, f), 2, 0, RngSpec())
    assert list(s.xs) == [3, 3] and list(s.ys) == [1, 1]


def test_target_frequencies_within_binomial_band():
    fam = _family()
    q = FiniteDistribution(fam.domain, [0.1, 0.2, 0.3, 0.4])
    s = draw_sample(UDAInstance(q, q, fam[0]), 0, 10_000, RngSpec(5))
    freq = np.bincount(s.xt, minlength=4) / 10_000
    sigma = np.sqrt(q.probs * (1 - q.probs) / 10_000)
    assert np.all(np.abs(freq - q.probs) <= 3 * sigma)


def test_enumeration_direct_product():
    fam = _family()
    p = FiniteDistribution(fam.domain, [0.3, 0.7, 0, 0])
    q = FiniteDistribution.point_mass(fam.domain, 2)
    samples = list(enumerate_samples(UDAInstance(p, q, fam[5]), 1, 1))
    assert len(samples) == 2
    assert [prob for _, prob in samples] == pytest.approx([0.3, 0.7])


def test_enumeration_normalises_and_matches_monte_carlo():
    fam = _family()
    p = FiniteDistribution(fam.domain, [0.1, 0.2, 0.3, 0.4])
    q = FiniteDistribution(fam.domain, [0.4, 0.0, 0.5, 0.1])
    inst = UDAInstance(p, q, fam.get("g0110"))
    samples = list(enumerate_samples(inst, 2, 2))
    assert math.fsum(prob for _, prob in samples) == pytest.approx(1.0, abs=1e-12)

    def stat(s):
        return float(s.ys.sum() + (s.xt == 2).sum())

    exact = math.fsum(prob * stat(s) for s, prob in samples)
    draws = np.array([stat(draw_sample(inst, 2, 2, RngSpec(9, t))) for t in range(10_000)])
    assert abs(draws.mean() - exact) <= 3 * draws.std(ddof=1) / np.sqrt(draws.size)


def test_enumeration_refuses_huge_spaces():
    fam = _family()
    p = FiniteDistribution.uniform_on(fam.domain, range(4))
    with pytest.raises(TooLarge):
        next(enumerate_samples(UDAInstance(p, p, fam[0]), 6, 6))


def test_random_class_shapes():
    pi = random_class(RngSpec(0), n_points=5, n_classifiers=40, k=2, n_entries=4)
    assert len(pi.family) == 32  # capped at 2^5 distinct tables
    assert len({t.tobytes() for t in pi.family.tables}) == 32
    assert pi.weights.sum() == pytest.approx(1.0)
    assert random_class(RngSpec(0), 5, 40, 2, 4).family.tables.tobytes() == pi.family.tables.tobytes()
