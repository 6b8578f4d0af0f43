"""Command-line interface.

Subcommands: run, sweep, compare, bias-lab, instability-lab, lb-lab, report.
"""

import argparse
import json
import sys

from . import harness, labsuite, report
from .numerics import SvdConvergenceError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fedsim",
        description="Deterministic federated-optimization simulation harness")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, spec_required=True):
        p.add_argument("--spec", required=spec_required,
                       help="experiment spec JSON path")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="override the run seed")
        p.add_argument("--workers", type=int, default=1,
                       help="parallel workers for grids/sweeps")
        p.add_argument("--eval-every", type=int, default=None,
                       help="override the evaluation cadence (rounds)")

    common(sub.add_parser("run", help="execute a single experiment spec"))
    common(sub.add_parser("sweep", help="run a spec's learning-rate grid"))
    pc = sub.add_parser("compare",
                        help="budget-matched comparison of several specs")
    pc.add_argument("--spec", required=True, action="append",
                    help="spec path (repeat per algorithm)")
    pc.add_argument("--out", required=True)
    pc.add_argument("--seed", type=int, default=None)
    pc.add_argument("--workers", type=int, default=1)
    pc.add_argument("--eval-every", type=int, default=None)

    for lab in ("bias-lab", "instability-lab", "lb-lab"):
        pl = sub.add_parser(lab, help="run the %s diagnostics" % lab)
        pl.add_argument("--spec", default=None,
                        help="optional lab parameter JSON (defaults built in)")
        pl.add_argument("--out", required=True)
        pl.add_argument("--seed", type=int, default=None)
        pl.add_argument("--workers", type=int, default=1)
        pl.add_argument("--eval-every", type=int, default=None)

    pr = sub.add_parser("report", help="render figures from recorded results")
    pr.add_argument("--results", required=True,
                    help="directory holding results.json")
    pr.add_argument("--out", required=True)
    return parser


def _load_lab_params(path):
    if path is None:
        return None
    with open(path) as fh:
        return json.load(fh)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except harness.SpecError as e:
        print("spec error: %s" % e, file=sys.stderr)
        return 2
    except harness.BudgetMismatch as e:
        print("budget mismatch: %s" % e, file=sys.stderr)
        return 2
    except SvdConvergenceError as e:
        print("numerical error in jacobi_svd: %s" % e, file=sys.stderr)
        return 1
    except (ValueError, FloatingPointError) as e:
        print("runtime error: %s" % e, file=sys.stderr)
        return 1


def _dispatch(args) -> int:
    if args.command == "run":
        spec = harness.load_spec(args.spec)
        rec = harness.run_experiment(spec, args.seed, args.eval_every)
        harness.write_run_outputs(args.out, rec)
        print("wrote %s/results.json (+metrics.csv)" % args.out)
        return 0
    if args.command == "sweep":
        spec = harness.load_spec(args.spec)
        sw = harness.sweep_experiment(spec, args.workers, args.seed,
                                      args.eval_every)
        harness.write_sweep_outputs(args.out, sw)
        print("winner: %s" % json.dumps(sw["winner"], sort_keys=True))
        return 0
    if args.command == "compare":
        specs = [harness.load_spec(p) for p in args.spec]
        cmp_out = harness.compare_experiments(specs, args.workers, args.seed,
                                              args.eval_every)
        harness.write_compare_outputs(args.out, cmp_out)
        for row in cmp_out["rows"]:
            print("%-16s K=%-4d best=%.6g"
                  % (row["algorithm"], row["local_steps"], row["best"]))
        return 0
    if args.command in ("bias-lab", "instability-lab", "lb-lab"):
        params = _load_lab_params(args.spec) or {}
        if args.seed is not None:
            params["seed"] = args.seed
    if args.command == "bias-lab":
        doc = labsuite.bias_lab(args.out, params)
    elif args.command == "instability-lab":
        doc = labsuite.instability_lab(args.out, params)
    elif args.command == "lb-lab":
        doc = labsuite.lb_lab(args.out, params)
    elif args.command == "report":
        files = report.render_report(args.results, args.out)
        print("wrote %d files" % len(files))
        return 0
    else:
        raise AssertionError(args.command)
    print("lab %s: %s" % (doc["lab"], "PASS" if doc["passed"] else "FAIL"))
    return 0 if doc["passed"] else 1


if __name__ == "__main__":
    sys.exit(main())
