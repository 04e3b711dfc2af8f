"""Command-line driver: ``asyncbcd {generate,run,compare,verify}``.

Exit codes: 0 success, 2 configuration error, 3 divergence, 4 monitor failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import experiment
from .config import ExperimentConfig
from .engine import write_monitor_report, write_trace_csv
from .errors import ConfigError, DegenerateAgentError, DivergenceError, PartitionError
from .objective import save_problem
from .svgplot import line_plot

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_MONITOR = 0, 2, 3, 4


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="experiment config (JSON)")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--seed", type=_u64, help="override the config seed")
    common.add_argument("--horizon", type=int)
    common.add_argument("--rule", choices=("local", "global", "manual"))
    common.add_argument("--safety", type=float)
    common.add_argument("--log-y", action="store_true", help="log-scaled ordinate in plots")
    common.add_argument("--problem", type=Path, help="load this problem file instead of generating")
    common.add_argument("--agents", type=int, help="number of agents for generated problems")

    p = argparse.ArgumentParser(prog="asyncbcd", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", parents=[common], help="generate and save a problem")
    sub.add_parser("run", parents=[common], help="run one experiment")
    sub.add_parser("compare", parents=[common], help="local vs global stepsizes on one schedule")
    v = sub.add_parser("verify", parents=[common], help="batch-check the descent monitors")
    v.add_argument("--seeds", dest="n_seeds", type=int)
    v.add_argument("--jobs", type=int)
    v.add_argument("--rules", nargs="+", choices=("local", "global", "manual"))
    return p


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _prepare_out(cfg: ExperimentConfig) -> Path:
    out = cfg.out_dir
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    return out


def cmd_generate(cfg: ExperimentConfig) -> int:
    problem = experiment.problem_from_config(cfg)
    out = _prepare_out(cfg)
    path = out / "problem.json"
    try:
        save_problem(problem, path)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    eig = np.linalg.eigvalsh(problem.objective.Q)
    D = problem.delays.D[problem.delays.links]
    print(f"wrote {path}")
    print(f"L_global = {float(problem.lipschitz.L_global)!r}")
    print(f"eigenvalues: min = {float(eig[0])!r}, max = {float(eig[-1])!r}")
    if D.size:
        print(f"delays D: min = {D.min()}, mean = {D.mean():.3f}, max = {D.max()}, B = {problem.delays.B}")
    else:
        print(f"delays D: no communication links, B = {problem.delays.B}")
    return EXIT_OK


def _summary(name: str, tr) -> str:
    m = tr.monitor
    verdict = "n/a" if m is None else ("pass" if m.passed else "FAIL: " + ", ".join(m.failures()))
    return (f"[{name}] stop t = {tr.stop_time} ({tr.stop_reason}), final f = {float(tr.f[-1])!r}, "
            f"final residual = {float(tr.residual_unscaled_total[-1])!r}, monitors: {verdict}")


def cmd_run(cfg: ExperimentConfig) -> int:
    problem = experiment.problem_from_config(cfg)
    sched = experiment.schedule_from_config(cfg, problem)
    plan = experiment.plan_from_config(cfg, problem)
    if not plan.within_bound:
        print("warning: stepsizes exceed the convergence bound", file=sys.stderr)
    out = _prepare_out(cfg)
    try:
        tr = experiment.run_config(cfg, problem, sched, plan)
    except DivergenceError as exc:
        if getattr(exc, "trace", None) is not None:
            write_trace_csv(exc.trace, out / "trace.csv")
            write_monitor_report(exc.trace, out / "monitor.json")
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    write_trace_csv(tr, out / "trace.csv")
    write_monitor_report(tr, out / "monitor.json")
    print(_summary(plan.rule, tr))
    return EXIT_OK if tr.monitor.passed else EXIT_MONITOR


def cmd_compare(cfg: ExperimentConfig) -> int:
    out = _prepare_out(cfg)
    try:
        cmp = experiment.compare(cfg)
    except DivergenceError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    write_trace_csv(cmp.local, out / "local.csv")
    write_trace_csv(cmp.global_, out / "global.csv")
    report = cmp.report()
    _write_json(out / "comparison.json", report)
    log_y = bool(cfg.data["compare"]["log_y"])
    series = []
    f_star = min(float(cmp.local.f.min()), float(cmp.global_.f.min()))
    for label, tr, style in (("local stepsizes", cmp.local, "solid"), ("global stepsize", cmp.global_, "dashed")):
        y = tr.f - f_star if log_y else tr.f
        series.append((label, np.arange(tr.f.size), y, style))
    svg = line_plot(series, title="Objective value along the true state", xlabel="t",
                    ylabel="f(x(t)) - min f" if log_y else "f(x(t))", log_y=log_y)
    (out / "compare.svg").write_text(svg, encoding="utf-8")
    print(_summary("local", cmp.local))
    print(_summary("global", cmp.global_))
    a = report["at_local_stop"]
    print(f"at t = {a['t']}: local residual {a['local_residual']!r}, global residual {a['global_residual']!r}")
    ok = all(tr.monitor.passed for tr in (cmp.local, cmp.global_))
    return EXIT_OK if ok else EXIT_MONITOR


def cmd_verify(cfg: ExperimentConfig, n_seeds=None, jobs=None, rules=None) -> int:
    out = _prepare_out(cfg)
    res = experiment.verify(cfg, n_seeds=n_seeds, rules=rules, jobs=jobs)
    _write_json(out / "verify.json", res)
    print(f"{res['n_runs']} runs, {res['n_failed']} failed, {res['n_diverged']} diverged")
    if res["passed"]:
        return EXIT_OK
    first = res["first_failure"]
    print(f"first failure: seed {first['seed']} rule {first['rule']}: {first.get('detail', '')}", file=sys.stderr)
    return EXIT_DIVERGED if first["diverged"] and res["n_diverged"] == res["n_failed"] else EXIT_MONITOR


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
        cfg = cfg.override(seed=args.seed, horizon=args.horizon, rule=args.rule, safety=args.safety,
                           log_y=args.log_y, out=args.out, agents=args.agents, problem=args.problem)
        if args.command == "generate":
            return cmd_generate(cfg)
        if args.command == "run":
            return cmd_run(cfg)
        if args.command == "compare":
            return cmd_compare(cfg)
        return cmd_verify(cfg, args.n_seeds, args.jobs, args.rules)
    except (ConfigError, PartitionError, DegenerateAgentError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
