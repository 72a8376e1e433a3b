"""Command-line interface: ``uda-ptlu <command> [flags]``.

Exit codes: 0 success, 1 invalid input (class file, sample file or flags),
2 numeric failure (zero evidence, unknown pair, problem too large, ...).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from contextlib import nullcontext

import numpy as np

from . import examples as ex
from .domain import Sample, UDAClass
from .errors import NumericError, UDAError, ValidationError
from .io import decode, dump_class, load_class, make_report, write_report
from .measures import f_divergence, h_delta_h, transfer_exponent, wasserstein, y_discrepancy
from .posterior import aggregate, harden_matrix, posterior_finite, posterior_infinite
from .risk import infinite_observations, optimal_overall_risk_infinite, optimal_samplewise_risk
from .sampling import RngSpec, UDAInstance, draw_instance_indexed, draw_sample, random_class
from .uncertainty import BITS, EntropyConfig, convergence_study, fano_bound, ptlu, verify_bounds

MEASURE_NAMES = ("kl", "chi2", "tv", "wasserstein", "h_delta_h", "y_discrepancy", "transfer_exponent")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _base(value: str | None) -> EntropyConfig | None:
    return None if value is None else EntropyConfig.parse(value)


def _common(cfg_default: str | None = "2") -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master seed (u64)")
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--log-base", choices=("2", "e"), default=cfg_default)
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="uda-ptlu", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    common = _common()

    p = sub.add_parser("analyze", parents=[common], help="optimal risk and uncertainty per observation")
    p.add_argument("class_file")

    p = sub.add_parser("sample", parents=[common], help="draw an instance and an (m, n)-sample")
    p.add_argument("class_file")
    p.add_argument("--m", type=int, default=10)
    p.add_argument("--n", type=int, default=10)

    p = sub.add_parser("posterior", parents=[common], help="posterior and aggregated classifier")
    p.add_argument("class_file")
    p.add_argument("--sample", help="sample report written by the sample command")
    p.add_argument("--m", type=int, default=10)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--infinite", action="store_true", help="condition on (p, q, f_p) of the drawn instance")

    p = sub.add_parser("bounds", parents=[common], help="count violations of the lower bounds")
    p.add_argument("class_file", nargs="?", help="omit to use a random class")
    p.add_argument("--m", type=int, default=5)
    p.add_argument("--n", type=int, default=5)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--t", type=float, default=0.1)
    p.add_argument("--points", type=int, default=8, help="random class: domain size")
    p.add_argument("--classifiers", type=int, default=16, help="random class: family size")
    p.add_argument("--k", type=int, default=2, help="random class: number of labels")
    p.add_argument("--entries", type=int, default=3, help="random class: number of (p, q) entries")

    p = sub.add_parser("measures", parents=[common], help="discrepancy measures for one entry")
    p.add_argument("class_file")
    p.add_argument("--entry", type=int, default=0)
    p.add_argument("--classifier", help="labeling function (default: first in the entry prior)")
    p.add_argument("--which", default=",".join(MEASURE_NAMES))
    p.add_argument("--order", type=float, default=1.0, help="Wasserstein order d")
    p.add_argument("--chart-start", type=float, help="unroll angles onto [start, start + 360)")

    p = sub.add_parser("examples", parents=[_common(None)], help="regression table for the worked examples")
    p.add_argument("--id", type=int, choices=(1, 2, 3, 4), action="append", help="example id (repeatable)")
    p.add_argument("--resolution", type=int)
    p.add_argument("--class", dest="which_class", type=int, choices=(1, 2))
    p.add_argument("--which", default=",".join(ex.MEASURES))
    p.add_argument("--export-class", help="write the built class file here (single example and class)")

    p = sub.add_parser("converge", parents=[common], help="empirical vs. infinite-sample uncertainty gap")
    p.add_argument("class_file")
    p.add_argument("--schedule", default="250:250,1000:1000,4000:4000", help="comma list of m:n")
    p.add_argument("--trials", type=int, default=50)
    return parser


# ---------------------------------------------------------------------------
# commands


def _config(args, *names) -> dict:
    cfg = {"seed": args.seed, "log_base": args.log_base}
    for name in names:
        cfg[name] = getattr(args, name)
    return cfg


def cmd_analyze(args) -> dict:
    pi = load_class(args.class_file)
    cfg = _base(args.log_base)
    rows = []
    for obs in infinite_observations(pi):
        rho, q = obs.posterior, obs.q
        e_star = optimal_samplewise_risk(rho, q)
        U_bits = ptlu(rho, q, BITS)
        rows.append(
            {
                "entries": list(obs.entries),
                "representative": pi.family.names[int(obs.members[0])],
                "group_size": int(len(obs.members)),
                "mass": obs.mass,
                "e_star": e_star,
                "ptlu": ptlu(rho, q, cfg),
                "fano_bound": fano_bound(U_bits, pi.k, e_star),
            }
        )
    result = {"R_star_infinite": optimal_overall_risk_infinite(pi), "observations": rows}
    return make_report("analyze", _config(args, "class_file"), result)


def _draw(pi: UDAClass, m: int, n: int, seed: int):
    entry, inst = draw_instance_indexed(pi, RngSpec(seed, 0))
    return entry, inst, draw_sample(inst, m, n, RngSpec(seed, 1))


def cmd_sample(args) -> dict:
    pi = load_class(args.class_file)
    entry, inst, s = _draw(pi, args.m, args.n, args.seed)
    result = {"entry": entry, "f": inst.f.name, "xs": s.xs, "ys": s.ys, "xt": s.xt}
    return make_report("sample", _config(args, "class_file", "m", "n"), result)


def _read_sample(path: str) -> tuple[int, str, Sample]:
    try:
        with open(path, encoding="utf-8") as fh:
            res = decode(json.load(fh))["result"]
        return int(res["entry"]), str(res["f"]), Sample(np.array(res["xs"], int), np.array(res["xt"], int), np.array(res["ys"], int))
    except (OSError, KeyError, TypeError, ValueError) as exc:
        raise ValidationError.single("ShapeMismatch", f"unreadable sample file: {exc}") from exc


def cmd_posterior(args) -> dict:
    pi = load_class(args.class_file)
    if args.sample:
        entry, f_name, s = _read_sample(args.sample)
        if not 0 <= entry < len(pi.entries):
            raise ValidationError.single("BadValue", f"sample entry {entry} not in class")
    else:
        entry, inst, s = _draw(pi, args.m, args.n, args.seed)
        f_name = inst.f.name
    if args.infinite:
        e = pi.entries[entry]
        rho = posterior_infinite(pi, e.p, e.q, _named(pi, f_name))
        query = e.q.support
    else:
        rho = posterior_finite(pi, s)
        query = np.unique(s.xt) if s.n else np.arange(pi.domain.size)
    soft = aggregate(rho, query)
    hard = harden_matrix(soft.probs)
    labels = pi.family.labels.labels
    table = [
        {"point": int(x), **{f"p[{labels[y]}]": float(soft.probs[i, y]) for y in range(pi.k)}, "hardened": labels[hard[i]]}
        for i, x in enumerate(soft.query)
    ]
    result = {
        "entry": entry,
        "f": f_name,
        "posterior": [{"classifier": pi.family.names[i], "probability": float(rho.probs[i])} for i in rho.support],
        "aggregate": table,
    }
    return make_report("posterior", _config(args, "class_file", "m", "n", "infinite", "sample"), result)


def cmd_bounds(args) -> dict:
    if args.class_file:
        pi = load_class(args.class_file)
    else:
        pi = random_class(RngSpec(args.seed, 0).child(0), args.points, args.classifiers, args.k, args.entries)
    report = verify_bounds(pi, args.m, args.n, args.trials, rng=RngSpec(args.seed, 0).child(1), delta=args.delta, t=args.t)
    result = report.as_dict()
    result["violations"] = report.fano_violations + report.dominance_violations + report.g_failure_mass_exceed
    names = ("class_file", "m", "n", "trials", "delta", "t")
    if not args.class_file:
        names += ("points", "classifiers", "k", "entries")
    return make_report("bounds", _config(args, *names), result)


def _named(pi: UDAClass, name: str):
    if name not in pi.family:
        raise ValidationError.single("DanglingClassifierId", f"no classifier named {name!r}")
    return pi.family.get(name)


def _pick_classifier(pi: UDAClass, entry: int, name: str | None):
    if name is not None:
        return _named(pi, name)
    prior = pi.prior_matrix[entry]
    return pi.family[int(np.flatnonzero(prior)[0])]


def cmd_measures(args) -> dict:
    pi = load_class(args.class_file)
    if not 0 <= args.entry < len(pi.entries):
        raise ValidationError.single("BadValue", f"entry {args.entry} outside 0..{len(pi.entries) - 1}")
    which = [w.strip() for w in args.which.split(",") if w.strip()]
    unknown = [w for w in which if w not in MEASURE_NAMES]
    if unknown:
        raise ValidationError.single("BadValue", f"unknown measures {unknown}")
    e = pi.entries[args.entry]
    f = _pick_classifier(pi, args.entry, args.classifier)
    rows = []
    for name in which:
        if name in ("kl", "chi2", "tv"):
            res = f_divergence(e.p, e.q, name)
        elif name == "wasserstein":
            res = wasserstein(e.p, e.q, args.order, chart_start=args.chart_start)
        elif name == "h_delta_h":
            res = h_delta_h(e.p, e.q, pi.family)
        elif name == "y_discrepancy":
            res = y_discrepancy(e.p, e.q, f, pi.family)
        else:
            res = transfer_exponent(e.p, e.q, f, pi.family)
        witness = res.witness if isinstance(res.witness, (str, tuple)) else None
        rows.append({"measure": name, "value": res.value, "witness": None if witness is None else list(witness) if isinstance(witness, tuple) else witness})
    config = _config(args, "class_file", "entry", "which", "order", "chart_start")
    config["classifier"] = f.name
    return make_report("measures", config, rows)


def cmd_examples(args) -> dict:
    ids = sorted(set(args.id or (1, 2, 3, 4)))
    specs = []
    for i in ids:
        classes = (args.which_class,) if args.which_class else ex.CLASSES[i]
        for c in classes:
            if c not in ex.CLASSES[i]:
                raise ValidationError.single("BadValue", f"example {i} has no class {c}")
            try:
                specs.append(ex.ExampleSpec(i, args.resolution, c))
            except ValueError as exc:
                raise ValidationError.single("BadValue", str(exc)) from exc
    which = tuple(w.strip() for w in args.which.split(",") if w.strip())
    unknown = [w for w in which if w not in ex.MEASURES]
    if unknown:
        raise ValidationError.single("BadValue", f"unknown measures {unknown}")
    if args.export_class:
        if len(specs) != 1:
            raise ValidationError.single("BadValue", "--export-class needs exactly one example and class")
        dump_class(ex.build_example(specs[0]).pi, args.export_class)
    rows = ex.regression_table(specs, _base(args.log_base), which)
    config = _config(args, "id", "resolution", "which_class", "which")
    return make_report("examples", config, rows)


def cmd_converge(args) -> dict:
    pi = load_class(args.class_file)
    try:
        schedule = [tuple(int(v) for v in item.split(":")) for item in args.schedule.split(",")]
        if any(len(pt) != 2 for pt in schedule):
            raise ValueError(args.schedule)
    except ValueError as exc:
        raise ValidationError.single("BadValue", f"bad schedule {args.schedule!r}") from exc
    entry, inst = draw_instance_indexed(pi, RngSpec(args.seed, 0))
    res = convergence_study(pi, inst, schedule, args.trials, RngSpec(args.seed, 0).child(1), _base(args.log_base))
    result = {
        "entry": entry,
        "f": inst.f.name,
        "U_infinite": res.U_infinite,
        "diagnostics": dict(res.diagnostics.__dict__),
        "rows": res.rows,
    }
    return make_report("converge", _config(args, "class_file", "schedule", "trials"), result)


COMMANDS = {
    "analyze": cmd_analyze,
    "sample": cmd_sample,
    "posterior": cmd_posterior,
    "bounds": cmd_bounds,
    "measures": cmd_measures,
    "examples": cmd_examples,
    "converge": cmd_converge,
}


def _thread_limit():
    value = os.environ.get("UDA_THREADS")
    if not value:
        return nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=max(1, int(value)))


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with _thread_limit():
            report = COMMANDS[args.command](args)
        text = write_report(report, args.format, args.out)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 1
    except (NumericError, UDAError) as exc:
        print(f"numeric error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    if args.out is None:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
