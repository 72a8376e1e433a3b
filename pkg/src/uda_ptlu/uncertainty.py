"""Entropy, posterior target label uncertainty and the Fano-type risk bounds.

Also hosts the verification harnesses that check the bounds on random
classes and the empirical convergence studies of the empirical uncertainty.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import entr

from .domain import Classifier, FiniteDistribution, Sample, UDAClass
from .errors import EmptyTargetSample, InconsistentClassifier, MissingEStar, WrongBase
from .posterior import Posterior, aggregate_matrix, consistent_mask, posterior_finite, posterior_infinite
from .risk import Learner, learner_zoo, optimal_samplewise_risk, samplewise_risk
from .sampling import RngSpec, UDAInstance, draw_instance_indexed, draw_sample

BOUND_TOL = 1e-9


@dataclass(frozen=True)
class EntropyConfig:
    log_base: str = "bits"

    def __post_init__(self):
        if self.log_base not in ("bits", "nats"):
            raise ValueError(f"log_base must be 'bits' or 'nats', not {self.log_base!r}")

    @property
    def scale(self) -> float:
        """Factor converting nats into this base."""
        return 1.0 / math.log(2) if self.log_base == "bits" else 1.0

    def log(self, x: float) -> float:
        return math.log(x) * self.scale

    @classmethod
    def parse(cls, text: str) -> EntropyConfig:
        names = {"2": "bits", "bits": "bits", "e": "nats", "nats": "nats"}
        if str(text) not in names:
            raise ValueError(f"log base must be 2 or e, got {text!r}")
        return cls(names[str(text)])


BITS = EntropyConfig("bits")
NATS = EntropyConfig("nats")


def entropy(dist, cfg: EntropyConfig = BITS) -> float:
    """Shannon entropy with 0 log(1/0) = 0."""
    return float(entr(np.asarray(dist, dtype=float)).sum() * cfg.scale)


def row_entropies(probs: np.ndarray, cfg: EntropyConfig = BITS) -> np.ndarray:
    return entr(probs).sum(axis=1) * cfg.scale


def ptlu(rho: Posterior, q: FiniteDistribution, cfg: EntropyConfig = BITS) -> float:
    """Expected entropy of the aggregated posterior label distribution under q."""
    support = q.support
    soft = aggregate_matrix(rho.family.tables, rho.probs, support, rho.family.k)
    return float(q.probs[support] @ row_entropies(soft, cfg))


def eptlu(rho: Posterior, s: Sample, cfg: EntropyConfig = BITS) -> float:
    """Same as ``ptlu`` with q replaced by the empirical measure of xt."""
    if s.n == 0:
        raise EmptyTargetSample("empirical uncertainty needs at least one target point")
    points, counts = np.unique(s.xt, return_counts=True)
    soft = aggregate_matrix(rho.family.tables, rho.probs, points, rho.family.k)
    return float(counts @ row_entropies(soft, cfg) / s.n)


def _require_bits(cfg: EntropyConfig) -> None:
    if cfg.log_base != "bits":
        raise WrongBase("the Fano-type bounds are stated for entropies in bits")


def fano_bound(U: float, k: int, e_star: float | None = None, cfg: EntropyConfig = BITS) -> float:
    """Lower bound on any learner's sample-wise risk from the uncertainty U.

    k > 2: (U - 1) / log2(k - 1), possibly negative (vacuous).
    k = 2: U^2 / 4 + e*^2.
    """
    _require_bits(cfg)
    if k > 2:
        return (U - 1.0) / math.log2(k - 1)
    if e_star is None:
        raise MissingEStar("the binary bound needs the optimal sample-wise risk")
    return U * U / 4.0 + e_star * e_star


@dataclass(frozen=True)
class BoundReport:
    bound_value: float
    risk_value: float | None
    slack: float | None
    holds: bool | None
    inputs: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    @classmethod
    def compare(cls, bound: float, risk: float | None, inputs: dict, extras: dict | None = None) -> BoundReport:
        if risk is None:
            return cls(bound, None, None, None, inputs, extras or {})
        slack = risk - bound
        return cls(bound, risk, slack, slack >= -BOUND_TOL, inputs, extras or {})


def risk_lower_bound_for_g(
    g: Classifier,
    rho: Posterior,
    q: FiniteDistribution,
    e_star: float | None,
    delta: float,
    cfg: EntropyConfig = BITS,
    sample: Sample | None = None,
) -> BoundReport:
    """Chebyshev-penalised Fano bound on R(g|q, f) for f ~ rho.

    The variance of R(g|q, f) is computed exactly over the posterior support.
    ``risk_value`` is the posterior mean of R(g|q, f); ``extras['failure_mass']``
    is the posterior probability of the event R(g|q, f) < bound, which the
    statement caps at delta.
    """
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if sample is not None:
        xs, ys = sample.xs, sample.ys
        if not np.array_equal(g.table[xs], ys):
            raise InconsistentClassifier(f"{g.name} does not reproduce the source labels")
    k = rho.family.k
    U = ptlu(rho, q, cfg)
    fano = fano_bound(U, k, e_star, cfg)
    support = rho.support
    qs = q.support
    risks = (rho.family.tables[np.ix_(support, qs)] != g.table[qs]) @ q.probs[qs]
    weights = rho.probs[support]
    mean = float(weights @ risks)
    variance = float(weights @ (risks - mean) ** 2)
    bound = fano - math.sqrt(variance / delta)
    failure = float(weights[risks < bound - BOUND_TOL].sum())
    return BoundReport.compare(
        bound,
        mean,
        {"U": U, "k": k, "e_star": e_star, "delta": delta, "log_base": cfg.log_base},
        {"variance": variance, "failure_mass": failure, "fano": fano},
    )


def eptlu_confidence(t: float, n: int, k: int, cfg: EntropyConfig = BITS) -> float:
    return 1.0 - math.exp(-2.0 * n * t * t / cfg.log(k) ** 2)


def eptlu_bound(
    Utilde: float,
    t: float,
    n: int,
    k: int,
    e_star: float | None = None,
    cfg: EntropyConfig = BITS,
    risk: float | None = None,
) -> BoundReport:
    """Risk bound from the empirical uncertainty, valid with the reported confidence.

    In the binary form (U~ - t) is clamped at zero before squaring.
    """
    if t <= 0 or n < 1:
        raise ValueError("need t > 0 and n >= 1")
    _require_bits(cfg)
    if k > 2:
        bound = (Utilde - t - 1.0) / math.log2(k - 1)
    else:
        if e_star is None:
            raise MissingEStar("the binary bound needs the optimal sample-wise risk")
        bound = max(Utilde - t, 0.0) ** 2 / 4.0 + e_star * e_star
    return BoundReport.compare(
        bound,
        risk,
        {"Utilde": Utilde, "t": t, "n": n, "k": k, "e_star": e_star, "log_base": cfg.log_base},
        {"confidence": eptlu_confidence(t, n, k, cfg)},
    )


# ---------------------------------------------------------------------------
# harnesses


@dataclass
class ViolationReport:
    trials: int
    learners: int
    checks: int = 0
    fano_violations: int = 0
    dominance_violations: int = 0
    min_fano_slack: float = math.inf
    min_dominance_slack: float = math.inf
    g_checks: int = 0
    g_violations: int = 0
    g_failure_mass_max: float = 0.0
    g_failure_mass_exceed: int = 0
    eptlu_checks: int = 0
    eptlu_violations: int = 0
    eptlu_allowed_rate: float = 0.0
    delta: float = 0.1
    t: float = 0.1

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def verify_bounds(
    pi: UDAClass,
    m: int,
    n: int,
    trials: int,
    learners: list[Learner] | Callable[[UDAClass], list[Learner]] | None = None,
    rng: RngSpec = RngSpec(),
    cfg: EntropyConfig = BITS,
    delta: float = 0.1,
    t: float = 0.1,
) -> ViolationReport:
    """Run every learner on ``trials`` random samples and count bound violations.

    Per trial: draw an instance and sample (stream = trial index), compute the
    posterior, U, e*, and check for every learner
      * dominance: e(A) >= e* (optimality of the hardened aggregate),
      * the Fano bound e(A) >= fano_bound(U, k, e*),
      * the empirical-uncertainty bound (allowed to fail at rate 1 - confidence),
    and for one random consistent g the bound on R(g|q, f) at level delta,
    both for the realised f and as exact posterior failure mass.
    """
    if learners is None:
        zoo = learner_zoo(pi, random_seeds=5, fixed=8)
    elif callable(learners):
        zoo = learners(pi)
    else:
        zoo = list(learners)
    k = pi.k
    report = ViolationReport(trials, len(zoo), delta=delta, t=t)
    if n >= 1:
        report.eptlu_allowed_rate = 1.0 - eptlu_confidence(t, n, k, cfg)
    for trial in range(trials):
        gen = rng.substream(trial).generator()
        _, inst = draw_instance_indexed(pi, gen)
        s = draw_sample(inst, m, n, gen)
        rho = posterior_finite(pi, s)
        U = ptlu(rho, inst.q, cfg)
        e_star = optimal_samplewise_risk(rho, inst.q)
        bound = fano_bound(U, k, e_star, cfg)
        Ut = eptlu(rho, s, cfg) if n >= 1 else None
        for learner in zoo:
            e = samplewise_risk(learner, s, rho, inst.q)
            report.checks += 1
            report.min_fano_slack = min(report.min_fano_slack, e - bound)
            report.min_dominance_slack = min(report.min_dominance_slack, e - e_star)
            report.fano_violations += e < bound - BOUND_TOL
            report.dominance_violations += e < e_star - 1e-12
            if Ut is not None:
                report.eptlu_checks += 1
                report.eptlu_violations += not eptlu_bound(Ut, t, n, k, e_star, cfg, risk=e).holds
        consistent = np.flatnonzero(consistent_mask(pi.family, s.xs, s.ys))
        if consistent.size:
            g = pi.family[int(gen.choice(consistent))]
            rep = risk_lower_bound_for_g(g, rho, inst.q, e_star, delta, cfg)
            realised = float(inst.q.probs @ (g.table != inst.f.table))
            report.g_checks += 1
            report.g_violations += realised < rep.bound_value - BOUND_TOL
            report.g_failure_mass_max = max(report.g_failure_mass_max, rep.extras["failure_mass"])
            report.g_failure_mass_exceed += rep.extras["failure_mass"] > delta
    return report


@dataclass(frozen=True)
class ConvergenceDiagnostics:
    beta: float
    K: int
    S: float
    alpha_p: float
    alpha_q: float
    N_p: int
    N_q: int

    @classmethod
    def compute(cls, pi: UDAClass, inst: UDAInstance) -> ConvergenceDiagnostics:
        rho = posterior_infinite(pi, inst.p, inst.q, inst.f)
        soft = aggregate_matrix(pi.family.tables, rho.probs, inst.q.support, pi.k)
        mask = np.all(pi.family.tables[:, inst.p.support] == inst.f.table[inst.p.support], axis=1)
        return cls(
            beta=float(soft.min()),
            K=int(mask.sum()),
            S=float(rho.evidence),
            alpha_p=float(inst.p.probs[inst.p.support].min()),
            alpha_q=float(inst.q.probs[inst.q.support].min()),
            N_p=int(inst.p.support.size),
            N_q=int(inst.q.support.size),
        )

    def assumption_holds(self, m: int, n: int) -> bool:
        return m > self.N_p and n > self.N_q and self.beta > 0


@dataclass
class ConvergenceResult:
    U_infinite: float
    diagnostics: ConvergenceDiagnostics
    rows: list[dict]


def convergence_study(
    pi: UDAClass,
    inst: UDAInstance,
    schedule: list[tuple[int, int]],
    trials: int,
    rng: RngSpec = RngSpec(),
    cfg: EntropyConfig = BITS,
) -> ConvergenceResult:
    """Gap |U(p, q, f_p) - U~(s_{m,n})| over resampled (m, n)-samples.

    Schedule point i uses the stream family ``rng.child(i)``, trial t its
    stream t, so adding points to a schedule never changes earlier rows.
    """
    U_inf = ptlu(posterior_infinite(pi, inst.p, inst.q, inst.f), inst.q, cfg)
    diag = ConvergenceDiagnostics.compute(pi, inst)
    rows = []
    for i, (m, n) in enumerate(schedule):
        base = rng.child(i)
        gaps = np.empty(trials)
        for trial in range(trials):
            s = draw_sample(inst, m, n, base.substream(trial))
            gaps[trial] = abs(U_inf - eptlu(posterior_finite(pi, s), s, cfg))
        rows.append(
            {
                "m": m,
                "n": n,
                "median_gap": float(np.median(gaps)),
                "mean_gap": float(math.fsum(gaps) / trials),
                "max_gap": float(gaps.max()),
                "assumption_A3": diag.assumption_holds(m, n),
            }
        )
    return ConvergenceResult(U_inf, diag, rows)


@dataclass(frozen=True)
class ConcentrationResult:
    trials: int
    exceed: int
    rate: float
    bound: float
    sigma: float

    @property
    def holds(self) -> bool:
        return self.rate <= self.bound + 3 * self.sigma


def eptlu_concentration(
    pi: UDAClass,
    inst: UDAInstance,
    m: int,
    n: int,
    t: float,
    trials: int,
    rng: RngSpec = RngSpec(),
    cfg: EntropyConfig = BITS,
) -> ConcentrationResult:
    """Empirical Pr[|U(s, q) - U~(s)| > t] with the labeled part held fixed.

    The source sample is drawn once from stream 0; trial j redraws x_t from
    stream j + 1. Compared against exp(-2 n t^2 / (log k)^2) and the
    binomial standard deviation of a rate at that level.
    """
    xs_sample = draw_sample(inst, m, 0, rng.substream(0))
    exceed = 0
    for trial in range(trials):
        xt = draw_sample(inst, 0, n, rng.substream(trial + 1)).xt
        s = Sample(xs_sample.xs, xt, xs_sample.ys)
        rho = posterior_finite(pi, s)
        exceed += abs(ptlu(rho, inst.q, cfg) - eptlu(rho, s, cfg)) > t
    bound = 1.0 - eptlu_confidence(t, n, pi.k, cfg)
    sigma = math.sqrt(bound * (1.0 - bound) / trials)
    return ConcentrationResult(trials, exceed, exceed / trials, bound, sigma)
