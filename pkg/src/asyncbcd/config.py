"""Experiment configuration files (JSON, versioned schema).

A config fully determines a run: every random draw is seeded from it.
Missing sections take the defaults below, which reproduce the 20-agent
comparison setup; unknown keys are rejected.
"""

from __future__ import annotations

import copy
import json
from pathlib import Path

from .errors import ConfigError

SCHEMA_VERSION = 1

DEFAULTS = {
    "schema_version": SCHEMA_VERSION,
    "seed": 0,
    "problem": {
        "file": None,
        "generate": {
            "N": 20,
            "block_sizes": None,
            "L_target": 100.0,
            "box_radius": 10000.0,
            "delay_max": 20,
            "update_gap_max": 0,
            "spectrum": "reflected",
        },
    },
    "schedule": {"horizon": 500, "mode": "every-step", "seed": None},
    "stepsize": {"rule": "local", "safety": 0.95, "gammas": None},
    "stop": {"tol": 1e-8, "halt": True},
    "x0": None,
    "compare": {"thresholds": [1e-2, 1e-4, 1e-6, 1e-8], "log_y": False},
    "verify": {"n_seeds": 50, "rules": ["local", "global"], "jobs": 1},
    "output": {"dir": "out"},
}


def _merge(base: dict, over: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in over.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(base[key], dict) and val is not None:
            if not isinstance(val, dict):
                raise ConfigError(f"config key {where!r} must be a table")
            out[key] = _merge(base[key], val, where + ".")
        else:
            out[key] = val
    return out


class ExperimentConfig:
    """Validated view over a config document; ``data`` is the merged dict."""

    def __init__(self, data: dict | None = None, base_dir: Path | None = None):
        data = data or {}
        if "schema_version" in data and data["schema_version"] != SCHEMA_VERSION:
            raise ConfigError(f"unsupported config schema_version {data['schema_version']!r}")
        self.data = _merge(DEFAULTS, data)
        self.base_dir = Path(base_dir) if base_dir is not None else Path.cwd()
        self._validate()

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError(f"config {path} must be a JSON object")
        return cls(doc, path.parent)

    def _validate(self):
        d = self.data
        try:
            seed = int(d["seed"])
        except (TypeError, ValueError):
            raise ConfigError(f"seed must be an integer, got {d['seed']!r}") from None
        if not 0 <= seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        gen = d["problem"]["generate"]
        if d["problem"]["file"] is None and int(gen["N"]) < 1:
            raise ConfigError(f"problem.generate.N must be at least 1, got {gen['N']}")
        if int(d["schedule"]["horizon"]) < 1:
            raise ConfigError("schedule.horizon must be at least 1")
        if d["stepsize"]["rule"] not in ("local", "global", "manual"):
            raise ConfigError(f"unknown stepsize rule {d['stepsize']['rule']!r}")
        if not float(d["stepsize"]["safety"]) > 0:
            raise ConfigError("stepsize.safety must be positive")
        if d["stepsize"]["rule"] == "manual" and d["stepsize"]["gammas"] is None:
            raise ConfigError("stepsize.gammas is required for the manual rule")
        if int(d["verify"]["n_seeds"]) < 1:
            raise ConfigError("verify.n_seeds must be at least 1")

    def override(self, **kw) -> "ExperimentConfig":
        """Return a copy with command-line overrides applied (``None`` = keep)."""
        d = copy.deepcopy(self.data)
        if kw.get("seed") is not None:
            d["seed"] = kw["seed"]
        if kw.get("horizon") is not None:
            d["schedule"]["horizon"] = kw["horizon"]
        if kw.get("rule") is not None:
            d["stepsize"]["rule"] = kw["rule"]
        if kw.get("safety") is not None:
            d["stepsize"]["safety"] = kw["safety"]
        if kw.get("log_y"):
            d["compare"]["log_y"] = True
        if kw.get("out") is not None:
            d["output"]["dir"] = str(kw["out"])
        if kw.get("agents") is not None:
            d["problem"]["generate"]["N"] = kw["agents"]
        if kw.get("n_seeds") is not None:
            d["verify"]["n_seeds"] = kw["n_seeds"]
        if kw.get("jobs") is not None:
            d["verify"]["jobs"] = kw["jobs"]
        if kw.get("problem") is not None:
            d["problem"]["file"] = str(Path(kw["problem"]).resolve())
        return ExperimentConfig(d, self.base_dir)

    # convenience accessors
    @property
    def seed(self) -> int:
        return int(self.data["seed"])

    @property
    def schedule_seed(self) -> int:
        s = self.data["schedule"]["seed"]
        return self.seed if s is None else int(s)

    @property
    def horizon(self) -> int:
        return int(self.data["schedule"]["horizon"])

    @property
    def mode(self) -> str:
        return self.data["schedule"]["mode"]

    @property
    def rule(self) -> str:
        return self.data["stepsize"]["rule"]

    @property
    def safety(self) -> float:
        return float(self.data["stepsize"]["safety"])

    @property
    def out_dir(self) -> Path:
        p = Path(self.data["output"]["dir"])
        return p if p.is_absolute() else Path.cwd() / p

    def problem_file(self) -> Path | None:
        f = self.data["problem"]["file"]
        if f is None:
            return None
        p = Path(f)
        return p if p.is_absolute() else self.base_dir / p

    def generator_args(self, seed: int | None = None) -> dict:
        g = self.data["problem"]["generate"]
        return {
            "seed": self.seed if seed is None else seed,
            "N": int(g["N"]),
            "block_sizes": g["block_sizes"],
            "L_target": float(g["L_target"]),
            "box_radius": float(g["box_radius"]),
            "delay_max": int(g["delay_max"]),
            "update_gap_max": int(g["update_gap_max"]),
            "spectrum": g["spectrum"],
        }

    def dumps(self) -> str:
        return json.dumps(self.data, indent=2, sort_keys=True) + "\n"
