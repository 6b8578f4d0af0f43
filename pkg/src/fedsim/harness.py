"""Experiment harness: JSON experiment specs, single runs, learning-rate
sweeps, and budget-matched comparisons, with versioned JSON/CSV outputs.

Output files
------------
run:     results.json (schema_version 1) + metrics.csv (round,metric,value,config_id)
sweep:   results.json (all runs + winner) + metrics.csv + sweep.csv
compare: compare.csv + results.json
"""

import csv
import io
import itertools
import json
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import metrics as M
from . import problems as P
from .federated import (FedAcParams, FedConfig, RunRecord, fedac_run,
                        fedavg_run, feddualavg_osp_run, feddualavg_run,
                        fedmid_osp_run, fedmid_run, minibatch_acsgd_run,
                        minibatch_sgd_run, potentials)

SCHEMA_VERSION = 1

PROBLEM_KINDS = ("quadratic", "piecewise_quadratic", "bias_demo", "lb4d",
                 "logcosh", "logreg_synthetic", "lasso_synthetic",
                 "lowrank_synthetic", "hetero_pair")
ALGORITHM_KINDS = ("fedavg", "fedac", "minibatch_sgd", "minibatch_acsgd",
                   "fedmid", "feddualavg", "fedmid_osp", "feddualavg_osp")
COMPOSITE_ALGS = ("fedmid", "feddualavg", "fedmid_osp", "feddualavg_osp")

# metric -> True when smaller is better
LOWER_IS_BETTER = {"suboptimality": True, "density": True, "rank": True,
                   "precision": False, "recall": False, "f1": False}


class SpecError(ValueError):
    """Invalid experiment spec; message carries the offending field path."""


def _need(d, key, typ, path):
    if key not in d:
        raise SpecError("%s.%s: missing required field" % (path, key))
    v = d[key]
    if typ is float:
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            raise SpecError("%s.%s: expected a number" % (path, key))
        return float(v)
    if typ is int:
        if not isinstance(v, int) or isinstance(v, bool):
            raise SpecError("%s.%s: expected an integer" % (path, key))
    elif not isinstance(v, typ):
        raise SpecError("%s.%s: expected %s" % (path, key, typ.__name__))
    return v


def load_spec(path) -> dict:
    with open(path) as fh:
        text = fh.read()
    try:
        spec = json.loads(text)
    except json.JSONDecodeError as e:
        raise SpecError("%s: line %d column %d: %s"
                        % (path, e.lineno, e.colno, e.msg)) from None
    validate_spec(spec)
    return spec


def validate_spec(spec: dict):
    if not isinstance(spec, dict):
        raise SpecError("spec: expected a JSON object")
    version = spec.get("version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise SpecError("version: unsupported spec version %r" % version)
    prob = _need(spec, "problem", dict, "spec")
    kind = _need(prob, "kind", str, "spec.problem")
    if kind not in PROBLEM_KINDS:
        raise SpecError("spec.problem.kind: unknown problem %r (one of %s)"
                        % (kind, ", ".join(PROBLEM_KINDS)))
    alg = _need(spec, "algorithm", dict, "spec")
    akind = _need(alg, "kind", str, "spec.algorithm")
    if akind not in ALGORITHM_KINDS:
        raise SpecError("spec.algorithm.kind: unknown algorithm %r (one of %s)"
                        % (akind, ", ".join(ALGORITHM_KINDS)))
    fed = _need(spec, "fed", dict, "spec")
    for key in ("clients", "local_steps", "rounds"):
        _need(fed, key, int, "spec.fed")
    _need(fed, "eta_client", float, "spec.fed")
    grid = spec.get("grid")
    if grid is not None:
        if not isinstance(grid, dict) or not grid:
            raise SpecError("spec.grid: expected a non-empty object")
        for key, vals in grid.items():
            if key not in ("eta_client", "eta_server"):
                raise SpecError("spec.grid.%s: only eta_client/eta_server "
                                "can be swept" % key)
            if not isinstance(vals, list) or not vals:
                raise SpecError("spec.grid.%s: expected a non-empty list" % key)
    metrics = spec.get("metrics", ["suboptimality"])
    if not isinstance(metrics, list):
        raise SpecError("spec.metrics: expected a list")
    for name in metrics:
        if name not in M.METRIC_NAMES:
            raise SpecError("spec.metrics: unknown metric %r (one of %s)"
                            % (name, ", ".join(M.METRIC_NAMES)))
    needs_truth = {"density", "precision", "recall", "f1"}
    if needs_truth & set(metrics) and kind != "lasso_synthetic":
        raise SpecError("spec.metrics: sparsity metrics need a "
                        "lasso_synthetic problem with stored ground truth")
    if "rank" in metrics and kind != "lowrank_synthetic":
        raise SpecError("spec.metrics: rank needs a lowrank_synthetic problem")
    if {"potential_psi", "potential_phi"} & set(metrics) and akind != "fedac":
        raise SpecError("spec.metrics: potentials are defined for fedac runs")
    if akind in COMPOSITE_ALGS and kind not in ("lasso_synthetic",
                                                "lowrank_synthetic"):
        raise SpecError("spec.algorithm.kind: %s needs a composite problem "
                        "(lasso_synthetic or lowrank_synthetic)" % akind)
    target = spec.get("target_metric", "suboptimality")
    if target not in LOWER_IS_BETTER:
        raise SpecError("spec.target_metric: unknown metric %r" % target)


def build_problem(spec: dict):
    prob = spec["problem"]
    kind = prob["kind"]
    params = dict(prob.get("params", {}))
    seed = prob.get("seed", 0)
    if kind == "quadratic":
        return P.make_quadratic(np.asarray(params["a"], dtype=np.float64),
                                np.asarray(params["c"], dtype=np.float64),
                                params.get("per_client_shift"),
                                params.get("sigma", 0.0))
    if kind == "piecewise_quadratic":
        return P.make_piecewise_quadratic(params["l"], params["sigma"])
    if kind == "bias_demo":
        return P.make_bias_demo()
    if kind == "lb4d":
        return P.make_lb4d(params["l"], params["sigma"], params["mu"],
                           params["zeta_star"], params["m"])
    if kind == "logcosh":
        return P.make_logcosh_instance(params["l"], params["q"],
                                       params["sigma"])
    if kind == "logreg_synthetic":
        return P.make_logreg_synthetic(params["d"], params["n"], params["m"],
                                       params["lam"], seed,
                                       params.get("margin_scale", 3.0),
                                       params.get("normalize", True))
    if kind == "lasso_synthetic":
        return P.make_lasso_synthetic(params["d1"], params["d0"], params["m"],
                                      params["n_per_client"], params["lam"],
                                      seed, params.get("noiseless", False))
    if kind == "lowrank_synthetic":
        return P.make_lowrank_synthetic(params["d"], params["r"], params["m"],
                                        params["n_per_client"], params["lam"],
                                        seed, params.get("noiseless", False))
    if kind == "hetero_pair":
        return P.HeteroPairProblem(params["l"], params["zeta_star"])
    raise SpecError("spec.problem.kind: unknown problem %r" % kind)


def build_evaluators(spec: dict, problem) -> dict:
    """Metric evaluators for the run; forces the composite optimum cache so
    parallel sweep workers share it read-only."""
    names = spec.get("metrics", ["suboptimality"])
    evals = {}
    for name in names:
        if name in ("grad_calls", "potential_psi", "potential_phi"):
            continue          # engine-recorded / post-run quantities
        if name == "suboptimality":
            if isinstance(problem, P.CompositeProblem):
                evals[name] = M.composite_suboptimality_evaluator(problem)
            else:
                evals[name] = M.suboptimality_evaluator(problem)
        elif name in ("density", "precision", "recall", "f1"):
            evals[name] = M.sparsity_evaluators(problem)[name]
        elif name == "rank":
            evals[name] = M.rank_evaluator(problem)
        else:
            raise SpecError("spec.metrics: unknown metric %r" % name)
    return evals


def build_config(spec: dict, seed_override=None, eval_every=None,
                 **overrides) -> FedConfig:
    fed = dict(spec["fed"])
    fed.update(overrides)
    if seed_override is not None:
        fed["seed"] = seed_override
    if eval_every is not None:
        fed["eval_every"] = eval_every
    fed.setdefault("seed", 0)
    allowed = {"clients", "local_steps", "rounds", "eta_client", "eta_server",
               "sample_size", "seed", "averaging_mode", "eval_every",
               "rho_mu", "record_snapshots"}
    unknown = set(fed) - allowed
    if unknown:
        raise SpecError("spec.fed: unknown fields %s" % sorted(unknown))
    try:
        return FedConfig(**fed)
    except (TypeError, ValueError) as e:
        raise SpecError("spec.fed: %s" % e) from None


def run_algorithm(spec: dict, problem, cfg: FedConfig,
                  evaluators=None) -> RunRecord:
    alg = spec["algorithm"]
    kind = alg["kind"]
    params = dict(alg.get("params", {}))
    x0 = spec.get("x0")
    if x0 is not None:
        x0 = np.asarray(x0, dtype=np.float64)
    if kind in COMPOSITE_ALGS:
        if not isinstance(problem, P.CompositeProblem):
            raise SpecError("algorithm %s needs a composite problem" % kind)
        fn = {"fedmid": fedmid_run, "feddualavg": feddualavg_run,
              "fedmid_osp": fedmid_osp_run,
              "feddualavg_osp": feddualavg_osp_run}[kind]
        return fn(problem, cfg, x0, evaluators=evaluators)
    if isinstance(problem, P.CompositeProblem):
        raise SpecError("algorithm %s runs on smooth problems only" % kind)
    if kind == "fedavg":
        return fedavg_run(problem, cfg, x0, evaluators=evaluators)
    if kind == "minibatch_sgd":
        return minibatch_sgd_run(problem, cfg, x0, evaluators=evaluators)
    if kind == "minibatch_acsgd":
        mu = params.get("mu", problem.strong_mu)
        return minibatch_acsgd_run(problem, cfg, mu, x0, evaluators=evaluators)
    if kind == "fedac":
        mu = params.get("mu", problem.strong_mu)
        ac = FedAcParams(params.get("variant", "I"), mu=mu,
                         eta=params.get("eta", cfg.eta_client),
                         gamma=params.get("gamma"), alpha=params.get("alpha"),
                         beta=params.get("beta"))
        return fedac_run(problem, cfg, ac, x0, evaluators=evaluators)
    raise SpecError("spec.algorithm.kind: unknown algorithm %r" % kind)


# ---------------------------------------------------------------------------
# run / sweep / compare


def parallel_map(fn, items, workers: int):
    """Order-preserving map; results are identical for any worker count."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def run_experiment(spec: dict, seed_override=None, eval_every=None) -> RunRecord:
    problem = build_problem(spec)
    metrics = set(spec.get("metrics", ["suboptimality"]))
    want_potentials = {"potential_psi", "potential_phi"} & metrics
    overrides = {"record_snapshots": True} if want_potentials else {}
    cfg = build_config(spec, seed_override, eval_every, **overrides)
    evaluators = build_evaluators(spec, problem)
    rec = run_algorithm(spec, problem, cfg, evaluators)
    if isinstance(problem, P.CompositeProblem) and problem._optimum is not None:
        rec.metadata["phi_star"] = problem._optimum[1]
    if want_potentials:
        mu = spec["algorithm"].get("params", {}).get("mu",
                                                     problem.strong_mu)
        pots = potentials(rec, problem, mu)
        for t, (psi, phi) in enumerate(pots):
            if "potential_psi" in metrics:
                rec.add("potential_psi", t, psi)
            if "potential_phi" in metrics:
                rec.add("potential_phi", t, phi)
        rec.metadata["potential_index"] = "local step t = r*K + k"
    return rec


def grid_points(spec: dict) -> list:
    """Cartesian product of the grid axes as override dicts (sorted axes,
    listed order preserved per axis)."""
    grid = spec.get("grid")
    if not grid:
        return [{}]
    axes = sorted(grid.keys())
    out = []
    for combo in itertools.product(*(grid[ax] for ax in axes)):
        out.append(dict(zip(axes, combo)))
    return out


def best_over_evals(rec: RunRecord, metric: str) -> float:
    rows = rec.series.get(metric)
    if not rows:
        raise SpecError("metric %r was not recorded" % metric)
    vals = [v for _, v in rows if np.isfinite(v)]
    if not vals:
        return float("inf") if LOWER_IS_BETTER[metric] else float("-inf")
    return min(vals) if LOWER_IS_BETTER[metric] else max(vals)


def sweep_experiment(spec: dict, workers: int = 1, seed_override=None,
                     eval_every=None) -> dict:
    """Run every grid point; per point record the best target-metric value
    over evaluations.  Ties break toward the smaller learning rates."""
    problem = build_problem(spec)
    evaluators = build_evaluators(spec, problem)
    target = spec.get("target_metric", "suboptimality")
    points = grid_points(spec)

    fail_value = float("inf") if LOWER_IS_BETTER[target] else float("-inf")

    def one(point):
        cfg = build_config(spec, seed_override, eval_every, **point)
        try:
            rec = run_algorithm(spec, problem, cfg, evaluators)
        except (ValueError, FloatingPointError):
            # infeasible hyperparameter derivation or diverged run: the grid
            # point participates with a worst-possible score
            return point, None, fail_value
        return point, rec, best_over_evals(rec, target)

    results = parallel_map(one, points, workers)
    sign = 1.0 if LOWER_IS_BETTER[target] else -1.0
    order = sorted(
        range(len(results)),
        key=lambda i: (sign * results[i][2],
                       results[i][0].get("eta_client", 0.0),
                       results[i][0].get("eta_server", 0.0)))
    table = []
    for rank, i in enumerate(order):
        point, rec, best = results[i]
        table.append({"config_id": i, "rank": rank, "best": best, **point})
    winner_i = order[0]
    return {
        "target_metric": target,
        "table": table,
        "winner": {"config_id": winner_i, **results[winner_i][0],
                   "best": results[winner_i][2]},
        "records": [rec for _, rec, _ in results if rec is not None],
        "points": [pt for pt, rec, _ in results if rec is not None],
        "failed_points": [pt for pt, rec, _ in results if rec is None],
    }


class BudgetMismatch(ValueError):
    pass


def compare_experiments(specs: list, workers: int = 1, seed_override=None,
                        eval_every=None) -> dict:
    """Best suboptimality per spec under a shared problem and equal budget;
    refuses mismatched budgets or problems."""
    if len(specs) < 2:
        raise SpecError("compare needs at least two specs")
    base_problem = json.dumps(specs[0]["problem"], sort_keys=True)
    budgets = []
    for i, spec in enumerate(specs):
        if json.dumps(spec["problem"], sort_keys=True) != base_problem:
            raise BudgetMismatch("spec %d uses a different problem" % i)
        fed = spec["fed"]
        s = fed.get("sample_size") or fed["clients"]
        budgets.append(s * fed["local_steps"] * fed["rounds"])
    if len(set(budgets)) != 1:
        raise BudgetMismatch("gradient budgets differ: %s" % budgets)
    rows = []
    sweeps = []
    for spec in specs:
        sw = sweep_experiment(spec, workers, seed_override, eval_every)
        sweeps.append(sw)
        calls = {rec.metadata["grad_calls_total"] for rec in sw["records"]}
        if len(calls) != 1 or calls.pop() != budgets[0]:
            raise BudgetMismatch("recorded gradient calls do not match "
                                 "the declared budget")
        rows.append({
            "algorithm": spec["algorithm"]["kind"],
            "clients": spec["fed"]["clients"],
            "local_steps": spec["fed"]["local_steps"],
            "rounds": spec["fed"]["rounds"],
            "best": sw["winner"]["best"],
            "winner": {k: v for k, v in sw["winner"].items()
                       if k in ("eta_client", "eta_server")},
        })
    return {"rows": rows, "sweeps": sweeps, "budget": budgets[0]}


def evaluate_metrics(rec: RunRecord, problem, names=None) -> list:
    """Metric rows [(round, name, value)] for a finished run.

    Rows recorded during the run are returned as-is (never recomputed, so
    CSV rows always round-trip through the JSON record); a requested metric
    that was not recorded is computed on the final output point.  Raises
    when the problem lacks what the metric needs (e.g. ground truth for F1).
    """
    if names is None:
        names = [n for n in rec.series if n != "grad_calls"]
    rows = []
    for name in names:
        if name in rec.series:
            rows.extend((rnd, name, val) for rnd, val in rec.series[name])
            continue
        if name in ("potential_psi", "potential_phi"):
            raise SpecError("potentials must be recorded during the run")
        point = rec.final.get("output")
        if point is None:
            raise SpecError("record has no final output point")
        spec_stub = {"metrics": [name]}
        fn = build_evaluators(spec_stub, problem)[name]
        final_round = rec.config["rounds"]
        rows.append((final_round, name, float(fn(np.asarray(point)))))
    return rows


# ---------------------------------------------------------------------------
# serialization


def write_run_outputs(out_dir, records, points=None, extra=None):
    """results.json + metrics.csv for one or many records; byte-stable for a
    fixed (spec, seed)."""
    os.makedirs(out_dir, exist_ok=True)
    if isinstance(records, RunRecord):
        records = [records]
    doc = {
        "schema_version": SCHEMA_VERSION,
        "kind": "results",
        "runs": [rec.to_json_dict() for rec in records],
    }
    if points is not None:
        doc["points"] = points
    if extra:
        doc.update(extra)
    _write_json(os.path.join(out_dir, "results.json"), doc)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["round", "metric", "value", "config_id"])
    for cid, rec in enumerate(records):
        for name in sorted(rec.series):
            for rnd, val in rec.series[name]:
                writer.writerow([rnd, name, repr(val), cid])
    with open(os.path.join(out_dir, "metrics.csv"), "w", newline="") as fh:
        fh.write(buf.getvalue())


def write_sweep_outputs(out_dir, sweep: dict):
    write_run_outputs(out_dir, sweep["records"], points=sweep["points"],
                      extra={"winner": sweep["winner"],
                             "target_metric": sweep["target_metric"]})
    path = os.path.join(out_dir, "sweep.csv")
    axes = sorted({k for row in sweep["table"] for k in row
                   if k not in ("config_id", "rank", "best")})
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["rank", "config_id", *axes, "best"])
        for row in sweep["table"]:
            writer.writerow([row["rank"], row["config_id"],
                             *(repr(float(row[a])) for a in axes),
                             repr(row["best"])])


def write_compare_outputs(out_dir, comparison: dict):
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "compare.csv")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["algorithm", "clients", "local_steps", "rounds",
                         "best"])
        for row in comparison["rows"]:
            writer.writerow([row["algorithm"], row["clients"],
                             row["local_steps"], row["rounds"],
                             repr(row["best"])])
    _write_json(os.path.join(out_dir, "results.json"), {
        "schema_version": SCHEMA_VERSION,
        "kind": "compare",
        "budget": comparison["budget"],
        "rows": comparison["rows"],
    })


def _write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
