"""Experiment drivers shared by the command line and the test-suite."""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .asynchrony import build_schedule, validate_partial_asynchrony
from .config import ExperimentConfig
from .engine import MonitorError, StopCriteria, run
from .errors import DivergenceError
from .objective import generate_problem, load_problem
from .stepsize import StepsizeBoundWarning, plan_for_problem


def problem_from_config(cfg: ExperimentConfig, seed: int | None = None):
    path = cfg.problem_file()
    if path is not None:
        return load_problem(path)
    return generate_problem(**cfg.generator_args(seed))


def schedule_from_config(cfg: ExperimentConfig, problem, seed: int | None = None):
    return build_schedule(problem.delays, cfg.horizon, cfg.schedule_seed if seed is None else seed, cfg.mode)


def plan_from_config(cfg: ExperimentConfig, problem, rule: str | None = None):
    rule = rule or cfg.rule
    safety = cfg.safety
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", StepsizeBoundWarning)
        return plan_for_problem(problem, rule, safety, cfg.data["stepsize"]["gammas"], unsafe=safety > 1)


def stop_from_config(cfg: ExperimentConfig) -> StopCriteria:
    s = cfg.data["stop"]
    return StopCriteria(float(s["tol"]), bool(s["halt"]))


def run_config(cfg: ExperimentConfig, problem, sched, plan):
    """Run without raising on monitor failures; divergence still raises."""
    return run(problem, sched, plan, stop=stop_from_config(cfg), x0=cfg.data["x0"], on_monitor_failure="ignore")


@dataclass
class Comparison:
    local: object
    global_: object
    schedule_digest: str
    thresholds: list

    def report(self) -> dict:
        out = {"schedule_digest": self.schedule_digest, "runs": {}}
        for name, tr in (("local", self.local), ("global", self.global_)):
            g = tr.plan.gammas
            out["runs"][name] = {
                "schedule_digest": tr.schedule_digest,
                "gamma_min": float(g.min()),
                "gamma_max": float(g.max()),
                "stop_time": tr.stop_time,
                "stop_reason": tr.stop_reason,
                "stationary_time": tr.stationary_time,
                "final_f": float(tr.f[-1]),
                "final_residual_unscaled": float(tr.residual_unscaled_total[-1]),
                "threshold_times": {repr(float(th)): tr.first_time_below(th) for th in self.thresholds},
                "monitor_passed": None if tr.monitor is None else tr.monitor.passed,
            }
        t_stop = self.local.stop_time
        loc_res = float(self.local.residual_unscaled_total[t_stop])
        glob = self.global_.residual_unscaled_total
        glob_res = float(glob[min(t_stop, glob.size - 1)])
        out["at_local_stop"] = {
            "t": t_stop,
            "local_residual": loc_res,
            "global_residual": glob_res,
            "ratio": (glob_res / loc_res) if loc_res > 0 else (math.inf if glob_res > 0 else 1.0),
        }
        return out


def compare(cfg: ExperimentConfig, problem=None, sched=None) -> Comparison:
    """Local and global rules on one problem and one shared schedule."""
    problem = problem or problem_from_config(cfg)
    sched = sched or schedule_from_config(cfg, problem)
    runs = {}
    for rule in ("local", "global"):
        runs[rule] = run_config(cfg, problem, sched, plan_from_config(cfg, problem, rule))
    assert runs["local"].schedule_digest == runs["global"].schedule_digest == sched.digest()
    return Comparison(runs["local"], runs["global"], sched.digest(), list(cfg.data["compare"]["thresholds"]))


def verify_one(args) -> dict:
    """Run one seeded experiment and summarise every monitor verdict."""
    cfg_data, base_dir, seed, rule = args
    cfg = ExperimentConfig(cfg_data, base_dir)
    problem = problem_from_config(cfg, seed)
    sched = schedule_from_config(cfg, problem, seed)
    plan = plan_from_config(cfg, problem, rule)
    sched_ok = bool(validate_partial_asynchrony(sched, problem.delays))
    rec = {"seed": seed, "rule": rule, "schedule_valid": sched_ok, "diverged": False}
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            tr = run_config(cfg, problem, sched, plan)
    except DivergenceError as exc:
        rec.update(diverged=True, divergence_t=exc.t, passed=False, detail=str(exc))
        return rec
    m = tr.monitor
    rec.update(
        stop_time=tr.stop_time,
        stop_reason=tr.stop_reason,
        theorem1=m.theorem1_pass,
        theorem1_worst_margin=m.theorem1.worst_margin,
        lemma3=m.lemma3_pass,
        lemma3_strict=m.lemma3.strict_passed,
        lemma3_worst_margin=m.lemma3.worst_margin if math.isfinite(m.lemma3.worst_margin) else None,
        staleness=m.staleness_pass,
        square_summable=m.square_sum_passed,
        passed=bool(m.passed and sched_ok),
        detail="; ".join(m.failures() + ([] if sched_ok else ["schedule invalid"])),
    )
    return rec


def verify(cfg: ExperimentConfig, n_seeds: int | None = None, rules=None, jobs: int | None = None) -> dict:
    n = int(cfg.data["verify"]["n_seeds"] if n_seeds is None else n_seeds)
    rules = list(rules or cfg.data["verify"]["rules"])
    jobs = int(cfg.data["verify"]["jobs"] if jobs is None else jobs)
    tasks = [(cfg.data, cfg.base_dir, cfg.seed + k, rule) for k in range(n) for rule in rules]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(verify_one, tasks))
    else:
        results = [verify_one(t) for t in tasks]
    results.sort(key=lambda r: (r["seed"], r["rule"]))
    failed = [r for r in results if not r["passed"]]
    return {
        "n_runs": len(results),
        "n_failed": len(failed),
        "n_diverged": sum(r["diverged"] for r in results),
        "passed": not failed,
        "first_failure": failed[0] if failed else None,
        "runs": results,
    }


def convergence_windows(trace, fraction: float = 0.05):
    """Max of ``|s(t)|`` and disagreement over the first and last ``fraction`` of a trace."""
    T = trace.step_blocks.shape[0]
    w = max(1, int(round(fraction * T)))
    s = trace.step_norm
    d = trace.disagreement[:T]
    return {
        "first_step": float(np.max(s[:w])),
        "last_step": float(np.max(s[-w:])),
        "first_disagreement": float(np.max(d[:w])),
        "last_disagreement": float(np.max(d[-w:])),
    }
