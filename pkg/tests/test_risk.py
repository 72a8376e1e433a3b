import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uda_ptlu.domain import ClassEntry, ClassifierFamily, Domain, FiniteDistribution, LabelSet, Sample, UDAClass
from uda_ptlu.posterior import Posterior, aggregate, posterior_finite, posterior_infinite
from uda_ptlu.risk import (
    FixedClassifierLearner,
    GibbsLearner,
    Mixture,
    OptimalLearner,
    RandomLearner,
    RiskReport,
    UniformConsistentLearner,
    expected_risk,
    learner_zoo,
    mixture_samplewise_risk,
    optimal_overall_risk_infinite,
    optimal_samplewise_risk,
    overall_risk,
    overall_risk_decomposed,
    samplewise_risk,
    target_risk,
)
from uda_ptlu.sampling import RngSpec, UDAInstance, draw_instance_indexed, draw_sample, random_class

from conftest import oracle_samplewise, two_pair_class


def test_target_risk_extremes():
    fam = ClassifierFamily.all_functions(Domain(3), LabelSet.binary())
    q = FiniteDistribution(fam.domain, [0.2, 0.8, 0.0])
    f = fam.get("g010")
    assert target_risk(f, q, f) == 0.0
    assert target_risk(fam.get("g101"), q, f) == pytest.approx(1.0)
    assert target_risk(fam.get("g011"), q, f) == pytest.approx(0.0)  # differs only off the support


def test_target_risk_example1_wedge(example_bundle):
    # f^45 and f^0 disagree on the wedges (45, 90) and (225, 270): all of that
    # lies outside the second quadrant and covers half of the first.
    for which, expected in ((1, 0.0), (2, 0.5)):
        b = example_bundle(1, which, 360)
        assert target_risk(b.family.get("f^45"), b.instance.q, b.instance.f) == pytest.approx(expected, abs=2 / 360)


def test_point_mass_posterior_and_matching_learner():
    fam = ClassifierFamily.all_functions(Domain(3), LabelSet.binary())
    q = FiniteDistribution.uniform_on(fam.domain, range(3))
    rho = Posterior.point_mass(fam, "g110")
    assert mixture_samplewise_risk(Mixture.single(fam.get("g110").table), rho, q) == 0.0
    assert optimal_samplewise_risk(rho, q) == 0.0


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 100_000))
def test_samplewise_risk_matches_triple_sum(seed):
    pi = random_class(RngSpec(seed), n_points=5, n_classifiers=10, k=3)
    gen = RngSpec(seed, 1).generator()
    rho = Posterior(pi.family, gen.dirichlet(np.ones(len(pi.family))))
    q = pi.entries[0].q
    out = gen.integers(0, 3, size=(4, 5))
    w = gen.dirichlet(np.ones(4))
    expected = oracle_samplewise(out, w, rho.probs, pi.family.tables, q.probs)
    assert mixture_samplewise_risk(Mixture(out, w), rho, q) == pytest.approx(expected, abs=1e-12)
    # Gibbs output: E_q (1 - sum_y rho^A(y|x)^2)
    soft = aggregate(rho).probs
    gibbs = float(q.probs @ (1 - (soft**2).sum(axis=1)))
    assert mixture_samplewise_risk(Mixture.over_family(pi.family, rho.probs), rho, q) == pytest.approx(gibbs, abs=1e-12)


def test_optimal_learner_example1_second_instance(example_bundle):
    b = example_bundle(1, 2, 360)
    inst = b.instance
    rho = posterior_infinite(b.pi, inst.p, inst.q, inst.f)
    e = mixture_samplewise_risk(OptimalLearner(b.pi).predict_infinite(inst.p, inst.q, inst.f), rho, inst.q)
    assert e == pytest.approx(0.25, abs=2 / 360)


@pytest.mark.parametrize("which,expected", [(1, 0.25), (2, 0.125)])
def test_optimal_samplewise_risk_example3(example_bundle, which, expected):
    b = example_bundle(3, which, 200)
    rho = posterior_infinite(b.pi, b.instance.p, b.instance.q, b.instance.f)
    assert optimal_samplewise_risk(rho, b.instance.q) == pytest.approx(expected, abs=2 / 200)


def _point_mass_class():
    fam = ClassifierFamily.all_functions(Domain(3), LabelSet.binary())
    p = FiniteDistribution.uniform_on(fam.domain, range(3))
    q = FiniteDistribution(fam.domain, [0.1, 0.6, 0.3])
    return UDAClass(fam, (ClassEntry(1.0, p, q, {"g101": 1.0}),))


def test_point_mass_instance_has_zero_risk():
    pi = _point_mass_class()
    inst = UDAInstance(pi.entries[0].p, pi.entries[0].q, pi.family.get("g101"))
    A = OptimalLearner(pi)
    assert expected_risk(A, inst, 2, 1).value == 0.0
    assert overall_risk(A, pi, 1, 1).value == 0.0
    assert overall_risk(A, pi, None, None, mode="infinite").value == 0.0


def test_exact_and_monte_carlo_agree():
    pi = two_pair_class()
    _, inst = draw_instance_indexed(pi, RngSpec(2))
    for A in (OptimalLearner(pi), GibbsLearner(pi), UniformConsistentLearner(pi.family)):
        exact = expected_risk(A, inst, 2, 2)
        mc = expected_risk(A, inst, 2, 2, mode="mc", trials=10_000, rng=RngSpec(8))
        assert abs(exact.value - mc.value) <= 3 * mc.standard_error + 1e-12


def test_overall_exact_and_monte_carlo_agree():
    pi = two_pair_class()
    A = OptimalLearner(pi)
    exact = overall_risk(A, pi, 1, 1)
    mc = overall_risk(A, pi, 1, 1, mode="mc", trials=10_000, rng=RngSpec(3))
    assert abs(exact.value - mc.value) <= 3 * mc.standard_error + 1e-12


def test_fixed_learner_ignores_the_sample():
    pi = two_pair_class()
    _, inst = draw_instance_indexed(pi, RngSpec(6))
    g = pi.family[9]
    for m, n in ((0, 0), (1, 2), (2, 1)):
        assert expected_risk(FixedClassifierLearner(g), inst, m, n).value == pytest.approx(target_risk(g, inst.q, inst.f), abs=1e-12)


def test_example2_second_class_infinite_risk(example_bundle):
    b = example_bundle(2, 2, 360)
    report = overall_risk(OptimalLearner(b.pi), b.pi, None, None, mode="infinite")
    assert report.value == pytest.approx(0.25, abs=2 / 360)
    assert report.value == pytest.approx(optimal_overall_risk_infinite(b.pi), abs=1e-12)


@pytest.mark.parametrize("m,n", [(1, 1), (2, 1), (0, 2)])
def test_decomposition_two_pair_class(m, n):
    pi = two_pair_class()
    for A in learner_zoo(pi, random_seeds=3, fixed=4):
        direct = overall_risk(A, pi, m, n).value
        assert overall_risk_decomposed(A, pi, m, n) == pytest.approx(direct, abs=1e-12)


def test_decomposition_single_pair_needs_no_pair_conditioning():
    pi = random_class(RngSpec(21), n_points=4, n_classifiers=10, k=2, n_entries=1)
    for A in learner_zoo(pi, random_seeds=2, fixed=3):
        direct = overall_risk(A, pi, 2, 1).value
        assert overall_risk_decomposed(A, pi, 2, 1, condition_on_pair=False) == pytest.approx(direct, abs=1e-12)


def test_decomposition_infinite_form():
    pi = two_pair_class()
    for A in learner_zoo(pi, random_seeds=2, fixed=3):
        direct = overall_risk(A, pi, None, None, mode="infinite").value
        assert overall_risk_decomposed(A, pi, None, None) == pytest.approx(direct, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000), st.integers(2, 4))
def test_optimal_learner_is_never_beaten(seed, k):
    pi = random_class(RngSpec(seed), n_points=6, n_classifiers=24, k=k)
    _, inst = draw_instance_indexed(pi, RngSpec(seed, 1))
    s = draw_sample(inst, 3, 2, RngSpec(seed, 2))
    rho = posterior_finite(pi, s)
    best = optimal_samplewise_risk(rho, inst.q)
    assert samplewise_risk(OptimalLearner(pi), s, rho, inst.q) == pytest.approx(best, abs=1e-12)
    for A in learner_zoo(pi, random_seeds=10):
        assert samplewise_risk(A, s, rho, inst.q) >= best - 1e-12


def test_optimal_infinite_risk_equals_optimal_learner():
    pi = two_pair_class()
    assert optimal_overall_risk_infinite(pi) == pytest.approx(
        overall_risk(OptimalLearner(pi), pi, None, None, mode="infinite").value, abs=1e-12
    )


def test_random_learner_is_a_function_of_the_observation():
    pi = two_pair_class()
    s = Sample([0, 1], [3], [1, 0])
    a, b = RandomLearner(pi.family, 4), RandomLearner(pi.family, 4)
    np.testing.assert_array_equal(a.predict(s).weights, b.predict(s).weights)
    assert not np.array_equal(a.predict(s).weights, RandomLearner(pi.family, 5).predict(s).weights)


def test_uniform_consistent_falls_back_to_family():
    pi = two_pair_class()
    mix = UniformConsistentLearner(pi.family).predict(Sample([0, 0], [], [0, 1]))
    np.testing.assert_allclose(mix.weights, 1 / len(pi.family))


def test_risk_report_invariant():
    with pytest.raises(ValueError):
        RiskReport(0.1, "monte-carlo")
    with pytest.raises(ValueError):
        RiskReport(0.1, "exact", standard_error=0.1)
    assert math.isclose(RiskReport(0.2, "monte-carlo", 0.01, 10).value, 0.2)
