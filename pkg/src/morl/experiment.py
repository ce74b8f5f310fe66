"""Config-driven experiment runner.

A run builds every artifact in memory and writes them only once the whole
computation has succeeded, so a failed or rejected run leaves no files behind.
All artifacts are deterministic functions of the resolved config.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import platform
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

import numpy as np
import scipy

import morl
from morl.algorithms.chvi import chvi, initial_state_ccs
from morl.algorithms.nes import MonesConfig, mones_train, outer_loop_nes
from morl.core import MomdpModel
from morl.envs import DeepSeaTreasureConfig, WaterReservoir, WaterReservoirConfig, dst_momdp, dst_true_front
from morl.envs.reservoir import OBJECTIVE_NAMES
from morl.indicators import UtilityPrior, expected_utility_metric, hypervolume, reference_point, sparsity
from morl.sets import SolutionSet, ccs_prune, pareto_prune

ALGORITHMS = ("mones", "outer_nes", "chvi", "study")
ENVIRONMENTS = ("water_reservoir", "deep_sea_treasure", "tabular")
RUN_METRICS = ("hypervolume", "eum", "sparsity")
DST_OBJECTIVES = ("treasure", "time")


class ConfigError(ValueError):
    """Raised for any problem with an experiment config; maps to exit code 2."""


@dataclass
class ExperimentConfig:
    environment: dict
    algorithm: str
    seed: int
    output_dir: str
    algorithm_config: dict = field(default_factory=dict)
    metrics: list = field(default_factory=lambda: ["hypervolume", "eum"])
    prior: dict = field(default_factory=dict)
    outer_loop_runs: int = 30
    base_dir: str = "."

    def resolved(self) -> dict:
        """Everything that determines the results, in canonical form (no output location)."""
        out = asdict(self)
        del out["output_dir"], out["base_dir"]
        return out

    def config_hash(self) -> str:
        text = json.dumps(self.resolved(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def mones_config(self) -> MonesConfig:
        return MonesConfig(**self.algorithm_config, seed=self.seed)

    def utility_prior(self) -> UtilityPrior:
        return UtilityPrior(**{"seed": self.seed, **self.prior})


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


def parse_config(doc: Any, environ=None, base_dir: str = ".") -> ExperimentConfig:
    """Validate a decoded JSON document. ``MORL_SEED`` in ``environ`` overrides the seed."""
    environ = os.environ if environ is None else environ
    _require(isinstance(doc, dict), "config must be a JSON object")
    known = {f.name for f in fields(ExperimentConfig)} - {"base_dir"}
    unknown = sorted(set(doc) - known)
    _require(not unknown, f"unknown config keys: {unknown}")
    for key in ("environment", "algorithm", "seed", "output_dir"):
        _require(key in doc, f"config is missing required key {key!r}")
    seed = doc["seed"]
    if "MORL_SEED" in environ:
        try:
            seed = int(environ["MORL_SEED"])
        except ValueError:
            raise ConfigError(f"MORL_SEED must be an integer, got {environ['MORL_SEED']!r}") from None
    _require(isinstance(seed, int) and not isinstance(seed, bool) and seed >= 0, "seed must be a nonnegative integer")
    cfg = ExperimentConfig(**{**doc, "seed": seed, "base_dir": base_dir})
    _require(cfg.algorithm in ALGORITHMS, f"unknown algorithm {cfg.algorithm!r}; expected one of {list(ALGORITHMS)}")
    _require(isinstance(cfg.output_dir, str) and cfg.output_dir != "", "output_dir must be a non-empty string")
    _require(isinstance(cfg.environment, dict) and "name" in cfg.environment, "environment must be an object with a name")
    _require(cfg.environment["name"] in ENVIRONMENTS,
             f"unknown environment {cfg.environment['name']!r}; expected one of {list(ENVIRONMENTS)}")
    _require(isinstance(cfg.metrics, list) and all(m in RUN_METRICS for m in cfg.metrics),
             f"metrics must be a list drawn from {list(RUN_METRICS)}")
    _require(isinstance(cfg.outer_loop_runs, int) and cfg.outer_loop_runs >= 1, "outer_loop_runs must be a positive integer")
    _require(isinstance(cfg.algorithm_config, dict) and isinstance(cfg.prior, dict),
             "algorithm_config and prior must be objects")
    learning = cfg.algorithm in ("mones", "outer_nes", "study")
    if learning:
        _require(cfg.environment["name"] == "water_reservoir", f"{cfg.algorithm} runs on the water_reservoir environment")
        _require("seed" not in cfg.algorithm_config, "set the seed at the top level, not in algorithm_config")
        _build(cfg.mones_config, "algorithm_config")
    else:
        _require(cfg.environment["name"] in ("deep_sea_treasure", "tabular"),
                 "chvi needs a finite model: deep_sea_treasure or tabular")
        allowed = {"tolerance", "max_iterations"}
        _require(set(cfg.algorithm_config) <= allowed, f"chvi algorithm_config accepts only {sorted(allowed)}")
    _build(cfg.utility_prior, "prior")
    _build(lambda: build_environment(cfg), "environment")
    return cfg


def _build(factory, what: str):
    try:
        return factory()
    except ConfigError:
        raise
    except (TypeError, ValueError, OSError) as exc:
        raise ConfigError(f"invalid {what}: {exc}") from None


def load_config(path: str | os.PathLike, environ=None) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    return parse_config(doc, environ, base_dir=str(Path(path).parent))


def build_environment(cfg: ExperimentConfig):
    """Returns ``(environment, objective names)``; for chvi the environment is a model or DST config."""
    spec = dict(cfg.environment)
    name = spec.pop("name")
    if name == "water_reservoir":
        env_cfg = WaterReservoirConfig(**spec)
        return WaterReservoir(env_cfg), list(OBJECTIVE_NAMES)
    if name == "deep_sea_treasure":
        if "treasure_depths" in spec:
            spec["treasure_depths"] = tuple(spec["treasure_depths"])
        if "treasure_values" in spec:
            spec["treasure_values"] = tuple(spec["treasure_values"])
        if "start" in spec:
            spec["start"] = tuple(spec["start"])
        return DeepSeaTreasureConfig(**spec), list(DST_OBJECTIVES)
    model_path = spec.pop("model", None)
    _require(model_path is not None and not spec, "tabular environment takes exactly one key: model")
    model = MomdpModel.from_json((Path(cfg.base_dir) / model_path).read_text(encoding="utf-8"))
    return model, [f"v{i}" for i in range(model.num_objectives)]


# ---------------------------------------------------------------- serialisation


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _floats(v) -> list[float]:
    return [float(x) for x in v]


def archive_csv(archive: list[SolutionSet], columns: list[str], config_hash: str) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["iteration", "policy_index", *columns, "config_hash"])
    for it, pop in enumerate(archive):
        for idx, v in pop:
            writer.writerow([it, idx, *(repr(float(x)) for x in v), config_hash])
    return buf.getvalue()


def series_csv(header: list[str], rows: list[list], config_hash: str) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([*header, "config_hash"])
    for row in rows:
        writer.writerow([*(x if isinstance(x, int) else repr(float(x)) for x in row), config_hash])
    return buf.getvalue()


def set_metrics(values: SolutionSet, metrics: list[str], ref, prior: UtilityPrior) -> dict:
    """Metric entries for one set; hypervolume and sparsity use its Pareto-pruned front."""
    front = pareto_prune(values)
    out: dict[str, Any] = {"count": len(values), "pruned_count": len(front)}
    if "hypervolume" in metrics:
        out["hypervolume"] = hypervolume(front, ref)
        out["ref_point"] = _floats(ref)
    if "sparsity" in metrics:
        out["sparsity"] = sparsity(front)
    if "eum" in metrics:
        out["eum"] = {"value": expected_utility_metric(values, prior), "samples": prior.sample_count,
                      "seed": prior.seed}
    return out


def objective_ranges(front: SolutionSet) -> list[float]:
    values = front.values()
    return _floats(values.max(axis=0) - values.min(axis=0))


# ---------------------------------------------------------------- runners


def _run_mones(cfg: ExperimentConfig, env, columns: list[str], h: str, prefix: str = ""):
    mcfg = cfg.mones_config()
    prior = cfg.utility_prior()
    result = mones_train(env, mcfg)
    files: dict[str, str] = {}
    final = result.archive[-1] if result.archive else SolutionSet()
    all_returns = np.vstack([s.values() for s in result.archive]) if result.archive else np.zeros((0, len(columns)))
    files[f"{prefix}archive.csv"] = archive_csv(result.archive, columns, h)
    files[f"{prefix}front.csv"] = pareto_prune(final).to_csv(columns, {"config_hash": h})
    files[f"{prefix}distribution.json"] = dump_json({
        **result.distribution.to_dict(), "topology": result.network.topology(), "config_hash": h,
    })
    summary: dict[str, Any] = {"iterations": len(result.archive), "population": mcfg.population,
                               "evals_per_policy": mcfg.evals_per_policy}
    if result.archive:
        # Reference point: component-wise worst return seen anywhere in this run.
        ref = reference_point(all_returns)
        rows = []
        for it, pop in enumerate(result.archive):
            row: list = [it]
            if "hypervolume" in cfg.metrics:
                row.append(hypervolume(pareto_prune(pop), ref))
            if "eum" in cfg.metrics:
                row.append(expected_utility_metric(pop, prior))
            rows.append(row)
        header = ["iteration"] + [m for m in ("hypervolume", "eum") if m in cfg.metrics]
        files[f"{prefix}metrics_by_iteration.csv"] = series_csv(header, rows, h)
        summary["final"] = set_metrics(final, cfg.metrics, ref, prior)
    return files, summary, all_returns, final


def _run_outer(cfg: ExperimentConfig, env, columns: list[str], h: str, prefix: str = ""):
    mcfg = cfg.mones_config()
    runs_prior = UtilityPrior(sample_count=cfg.outer_loop_runs, seed=cfg.seed)
    raw = outer_loop_nes(env, runs_prior, mcfg)
    files = {
        f"{prefix}runs.csv": raw.to_csv(columns, {"config_hash": h}),
        f"{prefix}front.csv": pareto_prune(raw).to_csv(columns, {"config_hash": h}),
    }
    summary = {"runs": len(raw)}
    return files, summary, raw


def _require_nonempty(final: SolutionSet) -> None:
    if not len(final):
        raise ConfigError("the study needs at least one MONES iteration")


def run_mones(cfg, env, columns, h):
    files, summary, _, _ = _run_mones(cfg, env, columns, h)
    return files, {"mones": summary}


def run_outer_nes(cfg, env, columns, h):
    files, summary, raw = _run_outer(cfg, env, columns, h)
    ref = reference_point(raw)
    summary["final"] = set_metrics(raw, cfg.metrics, ref, cfg.utility_prior())
    return files, {"outer_nes": summary}


def run_study(cfg, env, columns, h):
    """MONES and the outer-loop NES baseline under one seed, scored against a shared reference point."""
    m_files, m_summary, m_returns, m_final = _run_mones(cfg, env, columns, h, "mones_")
    n_files, n_summary, raw = _run_outer(cfg, env, columns, h, "nes_")
    _require_nonempty(m_final)
    prior = cfg.utility_prior()
    ref = reference_point(m_returns, raw)
    m_front, n_front = pareto_prune(m_final), pareto_prune(raw)
    comparison = {
        "ref_point": _floats(ref),
        "mones": {**set_metrics(m_final, cfg.metrics, ref, prior), "range": objective_ranges(m_front)},
        "outer_nes": {**set_metrics(raw, cfg.metrics, ref, prior), "range": objective_ranges(n_front)},
    }
    if "hypervolume" in cfg.metrics:
        comparison["mones_hypervolume_at_least_nes"] = (
            comparison["mones"]["hypervolume"] >= comparison["outer_nes"]["hypervolume"])
    comparison["mones_range_exceeds_nes"] = bool(all(
        a > b for a, b in zip(comparison["mones"]["range"], comparison["outer_nes"]["range"])))
    return {**m_files, **n_files}, {"mones": m_summary, "outer_nes": n_summary, "comparison": comparison}


def run_chvi(cfg, model_or_cfg, columns, h):
    options = cfg.algorithm_config
    if isinstance(model_or_cfg, DeepSeaTreasureConfig):
        model = dst_momdp(model_or_cfg)
    else:
        model = model_or_cfg
    sets = chvi(model, options.get("tolerance", 1e-9), options.get("max_iterations", 100_000))
    root = initial_state_ccs(model, sets)
    root = SolutionSet.from_values(sorted(root.value_tuples()))
    files = {"ccs.csv": root.to_csv(columns, {"config_hash": h})}
    summary: dict[str, Any] = {"ccs_size": len(root), "num_states": model.num_states}
    if isinstance(model_or_cfg, DeepSeaTreasureConfig):
        front = dst_true_front(model_or_cfg)
        files["true_front.csv"] = front.to_csv(columns, {"config_hash": h})
        summary["true_front_size"] = len(front)
        summary["ccs_matches_true_front"] = sorted(root.value_tuples()) == sorted(ccs_prune(front).value_tuples())
    return files, {"chvi": summary}


RUNNERS = {"mones": run_mones, "outer_nes": run_outer_nes, "study": run_study, "chvi": run_chvi}


def versions() -> dict:
    return {"morl": morl.__version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def execute(cfg: ExperimentConfig) -> dict[str, str]:
    """Run an experiment and return its artifacts as ``{file name: text}``."""
    env, columns = build_environment(cfg)
    h = cfg.config_hash()
    files, results = RUNNERS[cfg.algorithm](cfg, env, columns, h)
    files["report.json"] = dump_json({"algorithm": cfg.algorithm, "config_hash": h, "seed": cfg.seed,
                                      "objectives": columns, "results": results})
    manifest = {
        "config_hash": h,
        "seed": cfg.seed,
        "config": cfg.resolved(),
        "versions": versions(),
        "files": {name: hashlib.sha256(text.encode()).hexdigest() for name, text in sorted(files.items())},
    }
    files["manifest.json"] = dump_json(manifest)
    return files


def write_artifacts(output_dir: str | os.PathLike, files: dict[str, str]) -> None:
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, text in sorted(files.items()):
        with open(out / name, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
