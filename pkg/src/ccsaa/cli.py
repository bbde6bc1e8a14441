"""Experiment harness and command-line surface.

Subcommands: ``budget``, ``sample``, ``ingest``, ``solve``, ``validate``,
``experiment``, ``sweep-w``.  Exit codes: 0 success, 2 configuration error,
3 time-limit-partial results, 4 numerical failure.

Trial protocol: for each (N, trial) pair the training set is sampled with
seed ``base_seed + 1000 * trial`` and shared by every method in the trial;
the out-of-sample test set uses seed ``base_seed + 1000 * trial + 500000``
so the streams never overlap.  Rows whose run exceeded the time limit are
recorded with status ``time_limit`` and excluded from aggregate means.
"""

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .certificate import RiskSpec, binomial_upper_limit, max_removals
from .data import (Instance, estimate_moments, instance_from_dict,
                   read_instance, read_price_csv, returns_from_prices,
                   write_instance)
from .errors import CcsaaError, ConfigError, NumericalFailure, UnsupportedForMip
from .gaussian import sample_scenarios, solve_gaussian_exact
from .heuristics import METHODS, AsmConfig, run_method
from .mip import build_saa_bigm, mip_solve
from .reports import STATUS_OK, STATUS_TIME_LIMIT
from .saa import ScenarioSet, evaluate_outcomes

RAW_COLUMNS = ["method", "n_scenarios", "k", "trial", "seed", "objective",
               "wall_time", "lp_solves", "mip_nodes", "train_violations",
               "test_violation_rate", "binomial_upper_limit", "status"]
AGG_COLUMNS = ["method", "n_scenarios", "k", "runs", "objective_mean",
               "wall_time_mean", "lp_solves_mean", "mip_nodes_mean",
               "test_violation_rate_mean", "binomial_upper_limit_mean"]
SWEEP_COLUMNS = ["w", "n_scenarios", "k", "runs", "objective_mean",
                 "wall_time_mean", "constraints_added_mean",
                 "test_violation_rate_mean"]

ALL_METHODS = METHODS + ("exact-mip", "socp")


@dataclass
class ExperimentConfig:
    instance: Instance
    methods: list
    n_grid: list
    trials: int = 30
    base_seed: int = 1234
    time_limit: float = 3600.0
    test_set_size: int = 100_000
    w: float = 0.5
    polish_iterations: int | None = None
    semicontinuous: bool = False
    jobs: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not self.methods:
            raise ConfigError("methods must be non-empty")
        if any(n < 1 for n in self.n_grid):
            raise ConfigError("scenario counts must be positive")
        for m in self.methods:
            if m not in ALL_METHODS:
                raise ConfigError(f"unknown method {m!r}")

    @property
    def asm_config(self) -> AsmConfig:
        return AsmConfig(w=self.w, polish_iterations=self.polish_iterations)


@dataclass
class TrialRow:
    method: str
    n_scenarios: int
    k: int
    trial: int
    seed: int
    objective: float
    wall_time: float
    lp_solves: int
    mip_nodes: int
    train_violations: int
    test_violation_rate: float
    binomial_upper_limit: float
    status: str

    def as_list(self):
        return [getattr(self, c) for c in RAW_COLUMNS]


def scenario_seed(base_seed: int, trial: int) -> int:
    return base_seed + 1000 * trial


def test_seed(base_seed: int, trial: int) -> int:
    return base_seed + 1000 * trial + 500_000


def validate_solution(x, instance: Instance, test_set_size: int, seed: int,
                      beta: float | None = None):
    """Out-of-sample violation rate and its one-sided upper confidence limit."""
    x = np.asarray(x, dtype=float)
    if x.shape != (instance.n_assets,):
        raise ConfigError(f"solution has dimension {x.shape}, expected "
                          f"({instance.n_assets},)")
    beta = instance.beta if beta is None else beta
    test = sample_scenarios(instance.model, test_set_size, seed)
    violations = evaluate_outcomes(x, test, instance.program_spec).violation_count
    rate = violations / test_set_size
    upper = binomial_upper_limit(violations, test_set_size, 1.0 - beta)
    return rate, upper


def _run_one_method(method, instance, scenarios, budget, cfg, seed,
                    semi, time_limit):
    """Dispatch including the exact baselines the heuristics module omits."""
    if method == "socp":
        eps = budget.discard_fraction if budget.k_removals > 0 else instance.epsilon
        # at k = 0 fall back to the instance risk level rather than eps = 0
        return solve_gaussian_exact(instance.model, instance.alpha,
                                    max(eps, 1e-9), semi=semi,
                                    cash_index=instance.cash_index)
    if method == "exact-mip":
        model = build_saa_bigm(scenarios, instance.alpha, budget.k_removals,
                               instance.program_spec.objective)
        if semi is not None:
            from .mip import apply_semicontinuous
            apply_semicontinuous(model, semi,
                                 [j for j in range(instance.n_assets)
                                  if j != instance.cash_index])
        res = mip_solve(model, time_limit=time_limit or 3600.0)
        from .reports import SolveReport, WorkingSet
        status = STATUS_OK if res.status == "optimal" else STATUS_TIME_LIMIT
        return SolveReport(method="exact-mip", x=res.x[: instance.n_assets],
                           objective=res.objective_value,
                           working_set=WorkingSet([], {}),
                           lp_solves=1, mip_nodes=res.node_count,
                           wall_time=float("nan"), train_violations=0,
                           seed=seed, status=status)
    return run_method(method, scenarios, instance.program_spec, budget,
                      cfg=cfg, seed=seed, semi=semi, time_limit=time_limit)


def _trial_worker(args):
    """One (N, trial) work unit: sample once, run every method, validate."""
    (instance, methods, N, k_budget, trial, base_seed, time_limit,
     test_size, w, polish_a, semicontinuous) = args
    cfg = AsmConfig(w=w, polish_iterations=polish_a)
    semi = instance.semicontinuous if semicontinuous else None
    seed = scenario_seed(base_seed, trial)
    scenarios = sample_scenarios(instance.model, N, seed)
    rows = []
    for method in methods:
        rep = _run_one_method(method, instance, scenarios, k_budget, cfg,
                              seed, semi, time_limit)
        if method == "exact-mip":
            tv = evaluate_outcomes(rep.x, scenarios,
                                   instance.program_spec).violation_count
        else:
            tv = rep.train_violations
        rate, upper = validate_solution(rep.x, instance, test_size,
                                        test_seed(base_seed, trial))
        status = rep.status
        if time_limit is not None and rep.wall_time > time_limit:
            status = STATUS_TIME_LIMIT
        rows.append(TrialRow(method, N, k_budget.k_removals, trial, seed,
                             rep.objective, rep.wall_time, rep.lp_solves,
                             rep.mip_nodes, tv, rate, upper, status))
    return rows


def run_experiment(config: ExperimentConfig):
    """All (method, N, trial) rows plus per-(method, N) aggregate rows."""
    inst = config.instance
    budgets = {N: max_removals(N, inst.risk_spec) for N in config.n_grid}
    units = [(inst, list(config.methods), N, budgets[N], trial,
              config.base_seed, config.time_limit, config.test_set_size,
              config.w, config.polish_iterations, config.semicontinuous)
             for N in config.n_grid for trial in range(config.trials)]
    rows = []
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            for batch in pool.map(_trial_worker, units):
                rows.extend(batch)
    else:
        for unit in units:
            rows.extend(_trial_worker(unit))
    rows.sort(key=lambda r: (r.method, r.n_scenarios, r.trial))
    return rows, aggregate(rows)


def aggregate(rows):
    """Mean per (method, N) over rows that finished inside the limit."""
    groups = {}
    for r in rows:
        groups.setdefault((r.method, r.n_scenarios), []).append(r)
    out = []
    for (method, N), grp in sorted(groups.items()):
        ok = [r for r in grp if r.status == STATUS_OK]
        if not ok:
            continue
        out.append({
            "method": method, "n_scenarios": N, "k": ok[0].k, "runs": len(ok),
            "objective_mean": float(np.mean([r.objective for r in ok])),
            "wall_time_mean": float(np.mean([r.wall_time for r in ok])),
            "lp_solves_mean": float(np.mean([r.lp_solves for r in ok])),
            "mip_nodes_mean": float(np.mean([r.mip_nodes for r in ok])),
            "test_violation_rate_mean":
                float(np.mean([r.test_violation_rate for r in ok])),
            "binomial_upper_limit_mean":
                float(np.mean([r.binomial_upper_limit for r in ok])),
        })
    return out


def sweep_w(config: ExperimentConfig, w_values):
    """Per-w aggregates of the plain active-set method."""
    out = []
    for w in w_values:
        if not 0.0 <= w <= 1.0:
            raise ConfigError(f"w must lie in [0,1], got {w}")
        cfg = ExperimentConfig(
            instance=config.instance, methods=["asm1"], n_grid=config.n_grid,
            trials=config.trials, base_seed=config.base_seed,
            time_limit=config.time_limit, test_set_size=config.test_set_size,
            w=w, polish_iterations=config.polish_iterations,
            semicontinuous=config.semicontinuous, jobs=config.jobs)
        rows, _ = run_experiment(cfg)
        ok = [r for r in rows if r.status == STATUS_OK]
        for N in config.n_grid:
            sub = [r for r in ok if r.n_scenarios == N]
            if not sub:
                continue
            out.append({
                "w": w, "n_scenarios": N, "k": sub[0].k, "runs": len(sub),
                "objective_mean": float(np.mean([r.objective for r in sub])),
                "wall_time_mean": float(np.mean([r.wall_time for r in sub])),
                "constraints_added_mean":
                    float(np.mean([r.lp_solves - 1 for r in sub])),
                "test_violation_rate_mean":
                    float(np.mean([r.test_violation_rate for r in sub])),
            })
    return out


# ----------------------------------------------------------------------
# output helpers
# ----------------------------------------------------------------------

def write_csv(path, columns, records):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for rec in records:
            row = rec if isinstance(rec, list) else [rec[c] for c in columns]
            writer.writerow([_fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, float):
        return repr(float(v))
    return v


def write_plot_data(path, rows):
    """Tidy long-format CSV for external plotting."""
    metrics = ["objective", "wall_time", "lp_solves", "test_violation_rate"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "method", "n_scenarios", "trial", "value"])
        for r in rows:
            for m in metrics:
                writer.writerow([m, r.method, r.n_scenarios, r.trial,
                                 _fmt(float(getattr(r, m)))])


# ----------------------------------------------------------------------
# argument parsing
# ----------------------------------------------------------------------

def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=1234,
                        help="base seed for all sampling")
    common.add_argument("--jobs", type=int, default=1,
                        help="concurrent trial workers")
    common.add_argument("--time-limit", type=float, default=3600.0,
                        help="per-run solver time limit in seconds")

    p = argparse.ArgumentParser(prog="ccsaa",
                                description="chance-constrained scenario-program toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("budget", parents=[common],
                       help="certificate budget for one (N, eps, beta, n)")
    b.add_argument("--n-scenarios", type=int, required=True)
    b.add_argument("--epsilon", type=float, required=True)
    b.add_argument("--beta", type=float, required=True)
    b.add_argument("--n-dims", type=int, required=True)
    b.add_argument("--sum-limit", choices=["paper", "campi"], default="campi")

    s = sub.add_parser("sample", parents=[common],
                       help="sample a scenario CSV from an instance")
    s.add_argument("--instance", required=True)
    s.add_argument("--n-scenarios", type=int, required=True)
    s.add_argument("--out", required=True)

    i = sub.add_parser("ingest", parents=[common],
                       help="build an instance file from a price CSV")
    i.add_argument("--prices", required=True)
    i.add_argument("--lag", type=int, default=12)
    i.add_argument("--out", required=True)
    i.add_argument("--alpha", type=float, default=0.95)
    i.add_argument("--epsilon", type=float, default=0.05)
    i.add_argument("--beta", type=float, default=5e-6)
    i.add_argument("--no-cash", action="store_true",
                   help="do not append a unit-return cash column")

    so = sub.add_parser("solve", parents=[common], help="run one method")
    so.add_argument("--instance", required=True)
    so.add_argument("--method", required=True, choices=ALL_METHODS)
    so.add_argument("--scenarios", help="scenario CSV (else sampled fresh)")
    so.add_argument("--n-scenarios", type=int, default=10_000)
    so.add_argument("--epsilon", type=float,
                    help="override risk level (socp baseline only)")
    so.add_argument("--w", type=float, default=0.5)
    so.add_argument("--polish-a", type=int, default=None)
    so.add_argument("--semicontinuous", action="store_true")
    so.add_argument("--out", help="write a JSON report here")

    v = sub.add_parser("validate", parents=[common],
                       help="out-of-sample check of a saved solution")
    v.add_argument("--report", required=True,
                   help="JSON report from solve, or a JSON list holding x")
    v.add_argument("--instance", required=True)
    v.add_argument("--scenarios",
                   help="use this scenario CSV as the test set instead of sampling")
    v.add_argument("--test-size", type=int, default=100_000)
    v.add_argument("--beta", type=float, default=None)

    e = sub.add_parser("experiment", parents=[common],
                       help="full multi-method trial campaign")
    e.add_argument("--instance", required=True)
    e.add_argument("--methods", default="full,grp,rap,fgrp,pnd,fpnd,asm1,asm2,asm3")
    e.add_argument("--n-grid", default="1000,10000")
    e.add_argument("--trials", type=int, default=30)
    e.add_argument("--test-size", type=int, default=100_000)
    e.add_argument("--w", type=float, default=0.5)
    e.add_argument("--polish-a", type=int, default=None)
    e.add_argument("--semicontinuous", action="store_true")
    e.add_argument("--plot-data", action="store_true")
    e.add_argument("--out-dir", required=True)

    w = sub.add_parser("sweep-w", parents=[common],
                       help="active-set selection-weight sweep")
    w.add_argument("--instance", required=True)
    w.add_argument("--w-list", default="0.01,0.5,1.0")
    w.add_argument("--n-grid", default="10000")
    w.add_argument("--trials", type=int, default=30)
    w.add_argument("--test-size", type=int, default=100_000)
    w.add_argument("--out-dir", required=True)
    return p


def _load_instance(path) -> Instance:
    return read_instance(path)


def _cmd_budget(args):
    spec = RiskSpec(args.epsilon, args.beta, args.n_dims)
    budget = max_removals(args.n_scenarios, spec, sum_limit=args.sum_limit)
    print(f"{budget.k_removals},{float(budget.beta_achieved)!r},"
          f"{float(budget.discard_fraction)!r}")
    return 0


def _cmd_sample(args):
    inst = _load_instance(args.instance)
    sc = sample_scenarios(inst.model, args.n_scenarios, args.seed)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"a{j + 1}" for j in range(sc.n_assets)])
        for row in sc.returns:
            writer.writerow([repr(float(v)) for v in row])
    print(f"wrote {sc.n_scenarios} scenarios to {args.out}")
    return 0


def read_scenario_csv(path) -> ScenarioSet:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or not header[0].startswith("a"):
            raise ConfigError(f"{path}: expected header a1,...,an")
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            try:
                rows.append([float(v) for v in rec])
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: non-numeric value") from None
    if not rows:
        raise ConfigError(f"{path}: no scenario rows")
    return ScenarioSet(np.array(rows), provenance=f"file({path})")


def _cmd_ingest(args):
    panel = read_price_csv(args.prices)
    returns = returns_from_prices(panel, lag_months=args.lag)
    mean, cov = estimate_moments(returns)
    names = list(panel.names)
    cash_index = None
    if not args.no_cash:
        n = mean.size
        mean = np.append(mean, 1.0)
        grown = np.zeros((n + 1, n + 1))
        grown[:n, :n] = cov
        cov = grown
        names.append("CASH")
        cash_index = n
    inst = instance_from_dict({
        "names": names, "mean": mean.tolist(), "covariance": cov.tolist(),
        "alpha": args.alpha, "epsilon": args.epsilon, "beta": args.beta,
        "cash_index": cash_index,
    })
    write_instance(args.out, inst)
    print(f"wrote instance with {inst.n_assets} assets to {args.out}")
    return 0


def _cmd_solve(args):
    inst = _load_instance(args.instance)
    if args.scenarios:
        scenarios = read_scenario_csv(args.scenarios)
        if scenarios.n_assets != inst.n_assets:
            raise ConfigError("scenario file does not match the instance")
    else:
        scenarios = sample_scenarios(inst.model, args.n_scenarios, args.seed)
    budget = max_removals(scenarios.n_scenarios, inst.risk_spec)
    cfg = AsmConfig(w=args.w, polish_iterations=args.polish_a)
    semi = inst.semicontinuous if args.semicontinuous else None
    if args.method == "socp" and args.epsilon is not None:
        rep = solve_gaussian_exact(inst.model, inst.alpha, args.epsilon,
                                   semi=semi, cash_index=inst.cash_index)
    else:
        rep = _run_one_method(args.method, inst, scenarios, budget, cfg,
                              args.seed, semi, args.time_limit)
    rate, upper = validate_solution(rep.x, inst, 100_000,
                                    test_seed(args.seed, 0))
    print(f"method={rep.method} N={scenarios.n_scenarios} "
          f"k={budget.k_removals} objective={rep.objective:.6f} "
          f"solves={rep.lp_solves} nodes={rep.mip_nodes} "
          f"train_violations={rep.train_violations} "
          f"test_rate={rate:.5f} upper={upper:.5f} status={rep.status}")
    if args.out:
        payload = {
            "method": rep.method, "x": [float(v) for v in rep.x],
            "objective": rep.objective, "n_scenarios": scenarios.n_scenarios,
            "k": budget.k_removals, "lp_solves": rep.lp_solves,
            "mip_nodes": rep.mip_nodes, "wall_time": rep.wall_time,
            "train_violations": rep.train_violations,
            "test_violation_rate": rate, "binomial_upper_limit": upper,
            "status": rep.status, "seed": args.seed,
        }
        with open(args.out, "w") as fh:
            json.dump(payload, fh, indent=1)
            fh.write("\n")
    return 3 if rep.status == STATUS_TIME_LIMIT else 0


def _cmd_validate(args):
    inst = _load_instance(args.instance)
    with open(args.report) as fh:
        raw = json.load(fh)
    x = np.asarray(raw["x"] if isinstance(raw, dict) else raw, dtype=float)
    beta = inst.beta if args.beta is None else args.beta
    if args.scenarios:
        test = read_scenario_csv(args.scenarios)
        if test.n_assets != inst.n_assets:
            raise ConfigError("scenario file does not match the instance")
        violations = evaluate_outcomes(x, test, inst.program_spec).violation_count
        rate = violations / test.n_scenarios
        upper = binomial_upper_limit(violations, test.n_scenarios, 1.0 - beta)
    else:
        rate, upper = validate_solution(x, inst, args.test_size, args.seed,
                                        beta=beta)
    print(f"{float(rate)!r},{float(upper)!r}")
    return 0


def _cmd_experiment(args):
    import pathlib
    inst = _load_instance(args.instance)
    config = ExperimentConfig(
        instance=inst,
        methods=[m.strip() for m in args.methods.split(",") if m.strip()],
        n_grid=[int(v) for v in args.n_grid.split(",")],
        trials=args.trials, base_seed=args.seed, time_limit=args.time_limit,
        test_set_size=args.test_size, w=args.w,
        polish_iterations=args.polish_a,
        semicontinuous=args.semicontinuous, jobs=args.jobs)
    rows, aggs = run_experiment(config)
    outdir = pathlib.Path(args.out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    write_csv(outdir / "raw.csv", RAW_COLUMNS, [r.as_list() for r in rows])
    write_csv(outdir / "aggregate.csv", AGG_COLUMNS, aggs)
    if args.plot_data:
        write_plot_data(outdir / "plot_long.csv", rows)
    limited = sum(r.status == STATUS_TIME_LIMIT for r in rows)
    print(f"wrote {len(rows)} rows ({limited} over the time limit) to {outdir}")
    return 3 if limited else 0


def _cmd_sweep_w(args):
    import pathlib
    inst = _load_instance(args.instance)
    config = ExperimentConfig(
        instance=inst, methods=["asm1"],
        n_grid=[int(v) for v in args.n_grid.split(",")],
        trials=args.trials, base_seed=args.seed, time_limit=args.time_limit,
        test_set_size=args.test_size, jobs=args.jobs)
    w_values = [float(v) for v in args.w_list.split(",")]
    records = sweep_w(config, w_values)
    outdir = pathlib.Path(args.out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    write_csv(outdir / "sweep_w.csv", SWEEP_COLUMNS, records)
    print(f"wrote {len(records)} sweep rows to {outdir}")
    return 0


_COMMANDS = {
    "budget": _cmd_budget,
    "sample": _cmd_sample,
    "ingest": _cmd_ingest,
    "solve": _cmd_solve,
    "validate": _cmd_validate,
    "experiment": _cmd_experiment,
    "sweep-w": _cmd_sweep_w,
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, FileNotFoundError, KeyError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except UnsupportedForMip as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except NumericalFailure as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 4
    except CcsaaError as e:
        print(f"error: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
