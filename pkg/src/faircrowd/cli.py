"""Command-line entry point: ``faircrowd <subcommand> [--seed N] [--out PATH]``."""

import argparse
import sys

import numpy as np

from . import csvio
from .aggregate import bayes_posterior, dawid_skene, estimate_confusion, harden, majority_vote
from .baseline import post_td
from .dataset import GroupAssignment, generate_synthetic, load_csv, task_names
from .experiments import AGGREGATORS, DEFAULT_EPSILONS, DEFAULT_R, SCENARIOS, convergence, tradeoff, tradeoff_config
from .metrics import dp_gap
from .postprocess import FairCrowdConfig, apply, fairify
from .theory import verification_checks


def _floats(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _names(choices):
    def parse(text):
        items = [x.strip() for x in text.split(",") if x.strip()]
        bad = [x for x in items if x not in choices]
        if bad or not items:
            raise argparse.ArgumentTypeError(f"choose from {','.join(choices)}; got {text!r}")
        return items

    return parse


def _seed(text):
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _add_fc_flags(p):
    p.add_argument("--softmax-c", type=float, default=1e-4)
    p.add_argument("--delta", type=float, default=1e-5)
    p.add_argument("--alpha", type=float, default=0.04, help="tail width of the posterior spreading step")
    p.add_argument("--no-preprocess", action="store_true", help="skip the posterior spreading step")
    p.add_argument("--beta-bound", type=float, default=2.0)
    p.add_argument("--omega-grid", type=int, default=101)
    p.add_argument("--omega-method", choices=("exact", "grid"), default="exact")


def _fc_config(args, epsilon):
    return FairCrowdConfig(
        epsilon=epsilon,
        softmax_c=args.softmax_c,
        delta=args.delta,
        alpha=args.alpha,
        preprocess=not args.no_preprocess,
        beta_bound=args.beta_bound,
        omega_grid=args.omega_grid,
        omega_method=args.omega_method,
    )


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_seed, default=argparse.SUPPRESS, help="RNG seed (default 0)")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output CSV path, '-' for stdout")

    parser = argparse.ArgumentParser(prog="faircrowd", description=__doc__, parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("aggregate", parents=[common], help="posterior estimates from crowd votes")
    p.add_argument("--votes", required=True)
    p.add_argument("--groups", required=True)
    p.add_argument("--truth")
    p.add_argument("--method", choices=AGGREGATORS, default="mv")
    p.add_argument("--iters", type=int, default=20, help="EM rounds for ds")
    p.add_argument("--smoothing", type=float, default=1.0, help="pseudo-count for bayes")
    p.add_argument("--freeze-prior", action="store_true", help="keep the ds class prior at 1/2")
    p.add_argument("--report", help="fairness report CSV (default: <out>.report.csv)")

    p = sub.add_parser("fairify", parents=[common], help="epsilon-fair randomized labels from posteriors")
    p.add_argument("--posteriors", required=True, help="CSV with task_id,phi1")
    p.add_argument("--groups", required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--classifier", help="also write the fitted classifier here")
    _add_fc_flags(p)

    p = sub.add_parser("post-td", parents=[common], help="label massaging baseline")
    p.add_argument("--labels", required=True, help="CSV with task_id,label (e.g. an aggregate output)")
    p.add_argument("--groups", required=True)
    p.add_argument("--epsilon", type=float, required=True)

    p = sub.add_parser("convergence", parents=[common], help="gap convergence with crowd size")
    p.add_argument("--scenario", choices=tuple(SCENARIOS), default="competent")
    p.add_argument("--R", dest="R_list", type=_ints, default=list(DEFAULT_R))
    p.add_argument("--n-tasks", type=int, default=10_000)
    p.add_argument("--mc-reps", type=int, default=20)
    p.add_argument("--ds-freeze-prior", action="store_true", help="keep the ds class prior at 1/2")

    p = sub.add_parser("tradeoff", parents=[common], help="F1 versus DP gap of FC and Post_TD")
    p.add_argument("--votes")
    p.add_argument("--groups")
    p.add_argument("--truth")
    p.add_argument("--synthetic-tasks", type=int, default=2000, help="size of the generated dataset when no files are given")
    p.add_argument("--epsilons", type=_floats, default=list(DEFAULT_EPSILONS))
    p.add_argument("--methods", type=_names(AGGREGATORS), default=list(AGGREGATORS))
    p.add_argument("--fairifiers", type=_names(("fc", "post_td")), default=["fc", "post_td"])
    p.add_argument("--resamples", type=int, default=10)
    p.add_argument("--test-fraction", type=float, default=0.6)
    _add_fc_flags(p)

    p = sub.add_parser("verify-theory", parents=[common], help="numerical checks of the bounds")
    p.add_argument("--n-tasks", type=int, default=10_000)
    p.add_argument("--n-random", type=int, default=200)
    return parser


def _align_groups(parser, path, ids):
    groups = csvio.read_groups(path)
    missing = [t for t in ids if t not in groups]
    if missing:
        parser.error(f"task {missing[0]} has no group in {path}")
    return GroupAssignment(np.array([groups[t] for t in ids]))


def cmd_aggregate(args, parser):
    if args.method == "bayes" and not args.truth:
        parser.error("--method bayes requires --truth")
    m, g = load_csv(args.votes, args.groups, args.truth)
    if args.method == "mv":
        p = majority_vote(m)
    elif args.method == "bayes":
        p = bayes_posterior(m, g, estimate_confusion(m, g, args.smoothing))
    else:
        p, _ = dawid_skene(m, g, iters=args.iters, update_prior=not args.freeze_prior)
    csvio.write_posteriors(args.out, p, task_names(m))
    report_path = args.report or (None if args.out == "-" else args.out + ".report.csv")
    if min(g.group_sizes()) == 0:
        print("faircrowd: note: one group is empty, no fairness report written", file=sys.stderr)
        return 0
    report = dp_gap(harden(p), g)
    if report_path:
        csvio.write_rows(report_path, [csvio.report_row(args.method, None, report, args.seed)], csvio.REPORT_COLUMNS)
    return 0


def cmd_fairify(args, parser):
    ids, p = csvio.read_posteriors(args.posteriors)
    g = _align_groups(parser, args.groups, ids)
    rc = fairify(p, g, _fc_config(args, args.epsilon))
    q, labels = apply(rc, p, g, seed=args.seed)
    csvio.write_predictions(args.out, ids, q, labels)
    if args.classifier:
        csvio.write_classifier(args.classifier, rc)
    return 0


def cmd_post_td(args, parser):
    ids, labels = csvio.read_labels(args.labels)
    g = _align_groups(parser, args.groups, ids)
    out = post_td(labels, g, args.epsilon, seed=args.seed)
    csvio.write_predictions(args.out, ids, out.astype(float), out)
    return 0


def cmd_convergence(args, parser):
    rows = convergence(args.scenario, args.R_list, args.n_tasks, args.mc_reps, args.seed, not args.ds_freeze_prior)
    csvio.write_rows(args.out, rows)
    return 0


def cmd_tradeoff(args, parser):
    files = (args.votes, args.groups, args.truth)
    if any(files) and not all(files):
        parser.error("--votes, --groups and --truth go together")
    if all(files):
        m, g = load_csv(*files)
    else:
        m, g, _ = generate_synthetic(tradeoff_config(args.seed, args.synthetic_tasks))
    rows = tradeoff(
        m, g, args.epsilons, args.methods, args.fairifiers, args.resamples, args.test_fraction, args.seed,
        fc_config=_fc_config(args, 0.0),
    )
    csvio.write_rows(args.out, rows)
    return 0


def cmd_verify_theory(args, parser):
    rows = verification_checks(args.seed, args.n_tasks, args.n_random)
    csvio.write_rows(args.out, rows, ["check_name", "lhs", "rhs", "holds"])
    failed = [r["check_name"] for r in rows if not r["holds"]]
    if failed:
        print("violated: " + ", ".join(failed), file=sys.stderr)
        return 1
    return 0


COMMANDS = {
    "aggregate": cmd_aggregate,
    "fairify": cmd_fairify,
    "post-td": cmd_post_td,
    "convergence": cmd_convergence,
    "tradeoff": cmd_tradeoff,
    "verify-theory": cmd_verify_theory,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "seed"):
        args.seed = 0
    if not hasattr(args, "out"):
        args.out = "-"
    try:
        return COMMANDS[args.command](args, parser)
    except (ValueError, OSError) as exc:
        print(f"faircrowd: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
