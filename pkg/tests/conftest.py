"""Shared fixtures and slow-but-obvious oracles used across the test modules."""

import itertools
import math

import numpy as np
import pytest

from uda_ptlu.domain import ClassEntry, ClassifierFamily, Domain, FiniteDistribution, LabelSet, UDAClass
from uda_ptlu.examples import ExampleSpec, build_example


def raw_class(weights=(1.0,), prior=None):
    """Minimal class description in the file schema: 3 points, 2 classifiers."""
    prior = prior or {"f0": 0.5, "f1": 0.5}
    return {
        "schema_version": 1,
        "domain": {"metric": "discrete", "points": [{"id": i} for i in range(3)]},
        "labels": ["0", "1"],
        "classifiers": [{"id": "f0", "table": [0, 0, 1]}, {"id": "f1", "table": [0, 1, 1]}],
        "uda_class": {
            "entries": [{"weight": w, "p": {"0": 0.5, "1": 0.5}, "q": {"2": 1.0}, "prior_f": prior} for w in weights]
        },
    }


def two_pair_class():
    """Two (p, q) pairs over a 4-point domain and the full binary family."""
    dom = Domain(4, "euclidean", coords=np.arange(4.0)[:, None])
    fam = ClassifierFamily.all_functions(dom, LabelSet.binary())
    p1 = FiniteDistribution(dom, [0.5, 0.5, 0, 0])
    q1 = FiniteDistribution(dom, [0, 0, 0.3, 0.7])
    p2 = FiniteDistribution(dom, [0.2, 0.3, 0.5, 0])
    q2 = FiniteDistribution(dom, [0, 0.4, 0, 0.6])
    prior1 = {n: 1.0 / 8 for n in fam.names[:8]}
    prior2 = {n: 1.0 / 4 for n in fam.names[4:12:2]}
    return UDAClass(fam, (ClassEntry(0.6, p1, q1, prior1), ClassEntry(0.4, p2, q2, prior2)))


# ---------------------------------------------------------------------------
# oracles written as plain loops over the definitions


def oracle_posterior(pi, xs, xt, ys, entry=None):
    """rho(f|s) from the joint table over (entry, f), one loop per factor."""
    mass = np.zeros(len(pi.family))
    for e, ent in enumerate(pi.entries):
        if entry is not None and not (ent.p == pi.entries[entry].p and ent.q == pi.entries[entry].q):
            continue
        like = ent.weight
        for x in xs:
            like *= ent.p.probs[x]
        for x in xt:
            like *= ent.q.probs[x]
        for j, name in enumerate(pi.family.names):
            f = pi.family.tables[j]
            if all(f[x] == y for x, y in zip(xs, ys)):
                mass[j] += like * ent.prior_f.get(name, 0.0)
    return mass / mass.sum()


def oracle_samplewise(out_tables, out_weights, rho_probs, family_tables, q_probs):
    """Triple sum over x, f and g of q(x) rho(f) A(g) 1{f(x) != g(x)}."""
    total = 0.0
    for x, qx in enumerate(q_probs):
        if qx == 0:
            continue
        for f, rf in zip(family_tables, rho_probs):
            if rf == 0:
                continue
            for g, wg in zip(out_tables, out_weights):
                total += qx * rf * wg * (f[x] != g[x])
    return total


def oracle_transport(cost, a_counts, b_counts):
    """Exact OT by network simplex on integer data: masses a_counts / total."""
    import networkx as nx

    G = nx.DiGraph()
    for i, c in enumerate(a_counts):
        G.add_node(("a", i), demand=-int(c))
    for j, c in enumerate(b_counts):
        G.add_node(("b", j), demand=int(c))
    for i in range(len(a_counts)):
        for j in range(len(b_counts)):
            G.add_edge(("a", i), ("b", j), weight=int(cost[i][j]))
    return nx.min_cost_flow_cost(G) / sum(a_counts)


def oracle_h_delta_h(p, q, tables):
    best = 0.0
    for h, g in itertools.product(tables, repeat=2):
        dis = h != g
        best = max(best, abs(float(p.probs @ dis) - float(q.probs @ dis)))
    return best


def binary_entropy_bits(x):
    return 0.0 if x in (0.0, 1.0) else -(x * math.log2(x) + (1 - x) * math.log2(1 - x))


# ---------------------------------------------------------------------------
# fixtures


@pytest.fixture(scope="session")
def example_bundle():
    cache = {}

    def get(example_id, which_class=1, resolution=None):
        key = (example_id, which_class, resolution)
        if key not in cache:
            cache[key] = build_example(ExampleSpec(example_id, resolution, which_class))
        return cache[key]

    return get
