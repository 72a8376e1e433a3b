"""Discrepancy measures between source and target distributions.

f-divergences, Wasserstein distances, the HΔH divergence, the
Y-discrepancy and the marginal transfer exponent, all exact on finite
domains. Infinite values are returned as ``math.inf``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.optimize import linprog

from .domain import Classifier, ClassifierFamily, FiniteDistribution
from .errors import NoMetric, TooLarge

LP_SUPPORT_LIMIT = 512
PAIR_LIMIT = 10**8
DEFAULT_GAMMAS = tuple(round(1.0 + 0.1 * i, 1) for i in range(91))
DEFAULT_CS = tuple(2.0**i for i in range(-10, 11))


@dataclass(frozen=True)
class MeasureResult:
    name: str
    value: float
    witness: Any = None
    notes: dict = field(default_factory=dict)

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.value)


# ---------------------------------------------------------------------------
# f-divergences

_GENERATORS = {
    # kind: (f(t) on t > 0, f(0), slope of f at infinity)
    "kl": (lambda t: t * np.log(t), 0.0, math.inf),
    "chi2": (lambda t: (t - 1.0) ** 2, 1.0, math.inf),
    "tv": (lambda t: 0.5 * np.abs(t - 1.0), 0.5, 0.5),
}


def f_divergence(p: FiniteDistribution, q: FiniteDistribution, kind: str = "kl") -> MeasureResult:
    """E_q[f(p/q)] plus the singular part p(outside supp q) * f'(inf).

    KL is in nats; tv uses f(t) = |t - 1| / 2 so that it equals the total
    variation distance.
    """
    gen, f0, slope = _GENERATORS[kind]
    qs = q.support
    ratio = p.probs[qs] / q.probs[qs]
    values = np.where(ratio > 0, gen(np.where(ratio > 0, ratio, 1.0)), f0)
    regular = float(q.probs[qs] @ values)
    singular = float(p.probs[q.probs == 0].sum())
    if singular > 0:
        if math.isinf(slope):
            return MeasureResult(kind, math.inf, notes={"singular_mass": singular})
        regular += singular * slope
    return MeasureResult(kind, regular, notes={"singular_mass": singular})


# ---------------------------------------------------------------------------
# Wasserstein


def _quantile_cost(x: np.ndarray, px: np.ndarray, y: np.ndarray, py: np.ndarray, d: float) -> float:
    """Exact sum of |F^-1(u) - G^-1(u)|^d du for two 1-D discrete laws."""
    ox, oy = np.argsort(x, kind="stable"), np.argsort(y, kind="stable")
    x, px, y, py = x[ox], px[ox], y[oy], py[oy]
    cx, cy = np.cumsum(px), np.cumsum(py)
    cx[-1] = cy[-1] = 1.0
    breaks = np.union1d(cx, cy)
    lower = np.concatenate(([0.0], breaks[:-1]))
    mid = 0.5 * (lower + breaks)
    ix = np.minimum(np.searchsorted(cx, mid), len(x) - 1)
    iy = np.minimum(np.searchsorted(cy, mid), len(y) - 1)
    return float(np.diff(np.concatenate(([0.0], breaks))) @ np.abs(x[ix] - y[iy]) ** d)


def _circle_w1(angles: np.ndarray, diff: np.ndarray) -> float:
    """Exact geodesic W1 on the circle: min over a of sum gap_i |D_i - a|."""
    order = np.argsort(angles, kind="stable")
    a, w = angles[order], diff[order]
    cum = np.cumsum(w)
    gaps = np.diff(np.concatenate((a, [a[0] + 360.0])))
    sort = np.argsort(cum, kind="stable")
    cw = np.cumsum(gaps[sort])
    alpha = cum[sort][np.searchsorted(cw, 0.5 * cw[-1])]
    return float(gaps @ np.abs(cum - alpha))


def _ground_cost(domain, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if domain.metric == "angular-degrees":
        gap = np.abs(domain.angles[a][:, None] - domain.angles[b][None, :]) % 360.0
        return np.minimum(gap, 360.0 - gap)
    diff = domain.coords[a][:, None, :] - domain.coords[b][None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=2))


def transport_lp(cost: np.ndarray, a: np.ndarray, b: np.ndarray) -> tuple[float, np.ndarray]:
    """Exact discrete optimal transport via the transportation LP (HiGHS)."""
    n1, n2 = cost.shape
    rows = np.zeros((n1 + n2, n1 * n2))
    for i in range(n1):
        rows[i, i * n2 : (i + 1) * n2] = 1.0
    for j in range(n2):
        rows[n1 + j, j::n2] = 1.0
    res = linprog(cost.reshape(-1), A_eq=rows[:-1], b_eq=np.concatenate((a, b))[:-1], bounds=(0, None), method="highs")
    if res.status != 0:
        raise RuntimeError(f"transport LP failed: {res.message}")
    return float(res.fun), res.x.reshape(n1, n2)


def wasserstein(
    p: FiniteDistribution,
    q: FiniteDistribution,
    d: float = 1.0,
    chart_start: float | None = None,
    method: str = "auto",
) -> MeasureResult:
    """Order-d Wasserstein distance in the units of the domain metric.

    Angular domains use the geodesic arc distance in degrees. With
    ``chart_start`` set, angles are instead unrolled onto the line
    [chart_start, chart_start + 360) and transported there, which is the
    convention under which the circle examples report their distances.
    ``method="lp"`` forces the general transportation solver.
    """
    if d < 1:
        raise ValueError("order d must be >= 1")
    dom = p.domain
    if dom.metric == "discrete":
        raise NoMetric("discrete domains carry no ground metric")
    sp, sq = p.support, q.support
    a, b = p.probs[sp], q.probs[sq]
    if method == "auto":
        if dom.metric == "angular-degrees" and chart_start is not None:
            unroll = lambda ids: (dom.angles[ids] - chart_start) % 360.0 + chart_start
            value = _quantile_cost(unroll(sp), a, unroll(sq), b, d) ** (1.0 / d)
            return MeasureResult("wasserstein", value, notes={"method": "quantile", "chart_start": chart_start})
        if dom.metric == "euclidean" and dom.coords.shape[1] == 1:
            value = _quantile_cost(dom.coords[sp, 0], a, dom.coords[sq, 0], b, d) ** (1.0 / d)
            return MeasureResult("wasserstein", value, notes={"method": "quantile"})
        if dom.metric == "angular-degrees" and d == 1:
            ids = np.union1d(sp, sq)
            value = _circle_w1(dom.angles[ids], p.probs[ids] - q.probs[ids])
            return MeasureResult("wasserstein", value, notes={"method": "circle"})
    if max(len(sp), len(sq)) > LP_SUPPORT_LIMIT:
        raise TooLarge(f"support sizes {len(sp)}, {len(sq)} exceed {LP_SUPPORT_LIMIT} for the LP solver")
    cost, plan = transport_lp(_ground_cost(dom, sp, sq) ** d, a, b)
    return MeasureResult("wasserstein", max(cost, 0.0) ** (1.0 / d), witness=plan, notes={"method": "lp"})


# ---------------------------------------------------------------------------
# hypothesis-class aware measures


def _compress(H: ClassifierFamily, p: FiniteDistribution, q: FiniteDistribution):
    """Distinct rows restricted to supp(p) U supp(q), with identical columns merged."""
    cols = np.union1d(p.support, q.support)
    sub = np.ascontiguousarray(H.tables[:, cols])
    rows, first = np.unique(sub, axis=0, return_index=True)
    order = np.argsort(first)
    rows, first = rows[order], first[order]
    colkeys, inverse = np.unique(rows.T, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    w = p.probs[cols] - q.probs[cols]
    merged_w = np.bincount(inverse, weights=w, minlength=colkeys.shape[0])
    return colkeys.T, merged_w, first


def _pair_disagreement(H: ClassifierFamily, p, q, i: int, j: int) -> float:
    dis = H.tables[i] != H.tables[j]
    return abs(float(p.probs @ dis) - float(q.probs @ dis))


def h_delta_h(
    p: FiniteDistribution,
    q: FiniteDistribution,
    H: ClassifierFamily,
    max_pairs: int = PAIR_LIMIT,
    subsample: int | None = None,
    seed: int = 0,
) -> MeasureResult:
    """sup over pairs (h, h') of |Pr_p(h != h') - Pr_q(h != h')| with its witness.

    Pairs are scanned as blocked matrix products over the distinct
    restrictions of H. ``subsample`` scans only that many random distinct
    classifiers and marks the result as a lower bound.
    """
    table, w, reps = _compress(H, p, q)
    notes: dict = {}
    if subsample is not None and len(reps) > subsample:
        pick = np.sort(np.random.default_rng(seed).choice(len(reps), size=subsample, replace=False))
        table, reps = table[pick], reps[pick]
        notes["lower_bound"] = True
    elif len(reps) ** 2 > max_pairs:
        raise TooLarge(f"{len(reps)}^2 classifier pairs exceeds {max_pairs}; pass subsample=")
    total = w.sum()
    onehots = [(table == y).astype(float) for y in range(H.k)]
    best, best_pair = -1.0, (0, 0)
    block = max(1, int(4e6 // max(1, table.shape[0])))
    for start in range(0, table.shape[0], block):
        stop = min(start + block, table.shape[0])
        agree = sum((oh[start:stop] * w) @ oh.T for oh in onehots)
        diff = np.abs(total - agree)
        idx = np.unravel_index(np.argmax(diff), diff.shape)
        if diff[idx] > best:
            best, best_pair = float(diff[idx]), (start + idx[0], idx[1])
    i, j = int(reps[best_pair[0]]), int(reps[best_pair[1]])
    value = _pair_disagreement(H, p, q, i, j)
    return MeasureResult("h_delta_h", value, witness=(H.names[i], H.names[j]), notes=notes)


def _error_rates(H: ClassifierFamily, dist: FiniteDistribution, f: Classifier) -> np.ndarray:
    s = dist.support
    return (H.tables[:, s] != f.table[s]) @ dist.probs[s]


def y_discrepancy(p: FiniteDistribution, q: FiniteDistribution, f: Classifier, H: ClassifierFamily) -> MeasureResult:
    """sup over h of |Pr_p(h != f) - Pr_q(h != f)| with its witness."""
    gap = np.abs(_error_rates(H, p, f) - _error_rates(H, q, f))
    i = int(np.argmax(gap))
    return MeasureResult("y_discrepancy", float(gap[i]), witness=H.names[i])


def transfer_exponent(
    p: FiniteDistribution,
    q: FiniteDistribution,
    f: Classifier,
    H: ClassifierFamily,
    gamma_grid=DEFAULT_GAMMAS,
    C_grid=DEFAULT_CS,
) -> MeasureResult:
    """Smallest grid gamma for which some grid C satisfies
    C * Pr_p(h != f) >= Pr_q(h != f)^gamma for every h in H.

    Infinite when some h errs on q but never on p, or when no grid pair
    certifies. The witness is the certified (gamma, C).
    """
    rp, rq = _error_rates(H, p, f), _error_rates(H, q, f)
    blind = (rp <= 0) & (rq > 0)
    if np.any(blind):
        i = int(np.flatnonzero(blind)[0])
        return MeasureResult("transfer_exponent", math.inf, notes={"blind_classifier": H.names[i]})
    seen = rp > 0
    cs = np.sort(np.asarray(C_grid, dtype=float))
    for gamma in sorted(gamma_grid):
        need = float(np.max(rq[seen] ** gamma / rp[seen])) if seen.any() else 0.0
        ok = cs[cs * (1.0 + 1e-12) >= need]
        if ok.size:
            return MeasureResult("transfer_exponent", float(gamma), witness=(float(gamma), float(ok[0])))
    return MeasureResult("transfer_exponent", math.inf, notes={"reason": "no grid pair certifies"})
