"""Command-line interface: ``fit``, ``simulate`` and ``oracle``.

Exit codes: 0 success, 1 numerical failure, 2 configuration error, 3 input error.
"""
from __future__ import annotations

import argparse
import json
import sys

from .engine import PrConfig
from .exceptions import ConfigurationError, InputError, PrmixError
from .measure import SupportInterval
from .monotone import DEFAULT_LOWER, bias_bound, get_truth, kl_minimizer_coefficients
from .simulate import ExperimentSpec, fit_file, run_experiment, summarize

EXIT_OK, EXIT_FAILURE, EXIT_CONFIG, EXIT_INPUT = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def build_parser():
    p = _Parser(prog="prmix", description="Predictive recursion for monotone density estimation.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    f = sub.add_parser("fit", help="fit a single-column CSV of non-negative observations")
    f.add_argument("input", help="CSV file with one numeric column (optional header)")
    f.add_argument("--ell", type=float, default=DEFAULT_LOWER, help="lower end of the mixing support")
    f.add_argument("--perms", type=int, default=25, help="number of permutations to average")
    f.add_argument("--a", type=float, default=0.1, help="weight constant, w_i = a/(i+1), 0 < a < 2/9")
    f.add_argument("--grid", type=int, default=1000, help="grid nodes on the mixing support")
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--atom-lower", type=float, default=0.05, help="initial mass at the lower end")
    f.add_argument("--atom-upper", type=float, default=0.05, help="initial mass at the upper end")
    f.add_argument("--grenander", action="store_true", help="also fit the Grenander estimator")
    f.add_argument("-o", "--output-dir", default=None, help="output directory (default: next to input)")

    s = sub.add_parser("simulate", help="run a simulation study described by a JSON spec")
    s.add_argument("spec", help="JSON file mirroring ExperimentSpec")
    s.add_argument("-o", "--output-dir", default=None, help="override the spec's output_dir")
    s.add_argument("--workers", type=int, default=None, help="override the spec's worker count")

    o = sub.add_parser("oracle", help="print the Kullback-Leibler minimizer weights and the L1 bias bound")
    o.add_argument("truth", help="exponential | halfnormal")
    o.add_argument("--ell", type=float, required=True)
    o.add_argument("--L", type=float, required=True)
    return p


def _cmd_fit(args):
    config = PrConfig(
        weight_constant=args.a,
        grid_size=args.grid,
        permutations=args.perms,
        initial_atom_lower=args.atom_lower,
        initial_atom_upper=args.atom_upper,
        seed=args.seed,
    )
    summary = fit_file(args.input, config, args.output_dir, lower=args.ell, with_grenander=args.grenander)
    print(json.dumps(summary, indent=2))


def _cmd_simulate(args):
    spec = ExperimentSpec.from_json(args.spec)
    changes = spec.to_dict()
    changes["pr_config"] = spec.pr_config
    if args.output_dir is not None:
        changes["output_dir"] = args.output_dir
    if args.workers is not None:
        changes["workers"] = args.workers
    spec = ExperimentSpec(**changes)
    rows = run_experiment(spec)
    for (est, n), s in summarize(rows).items():
        print(f"{spec.truth_name} {est:>9} n={n:<6d} median L1={s['l1']:.4f} "
              f"median origin ratio={s['origin_ratio']:.3f} failures={s['failures']}")
    print(f"wrote {spec.output_dir}/results.csv")


def _cmd_oracle(args):
    truth = get_truth(args.truth)
    support = SupportInterval(args.ell, args.L)
    co = kl_minimizer_coefficients(truth, support)
    out = {"truth": truth.name, "ell": support.lower, "L": support.upper, **co.as_dict(),
           "bias_bound": bias_bound(truth, support)}
    print(json.dumps(out, indent=2))


COMMANDS = {"fit": _cmd_fit, "simulate": _cmd_simulate, "oracle": _cmd_oracle}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        COMMANDS[args.command](args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except PrmixError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
