"""Experiment configuration and the end-to-end pipeline steps used by the CLI."""

import dataclasses
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import data, evaluation, lifted, reference_tables
from .config import load_config, resolve_path
from .conic_solver import SolverOptions, solve
from .errors import ConfigError
from .logger import get_logger
from .network import SgdConfig, forward, sgd_sweep, sgd_train, training_loss
from .rounding import RoundingOptions, extract_weights, tos_round

log = get_logger(__name__)

QUICK_MAX_ITERS = 3000
QUICK_EPS_ABS, QUICK_EPS_REL = 1e-5, 1e-4
QUICK_SGD_ITERS = 20_000
QUICK_ROUND_ITERS = 300


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str
    gamma: float = 0.1
    bias: bool = False
    seed: int = 0
    split_seed: int = 0
    width: int = 300
    solver: SolverOptions = field(default_factory=SolverOptions)
    rounding: RoundingOptions = field(default_factory=RoundingOptions)
    sgd: SgdConfig = field(default_factory=SgdConfig)
    output_dir: Path = Path("runs")
    cache_dir: Path = Path("cache")
    registry: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not str(self.dataset).strip():
            raise ConfigError("dataset", "must name a generator, registry entry or file")
        try:
            gamma = float(self.gamma)
        except (TypeError, ValueError) as e:
            raise ConfigError("gamma", f"must be a number, got {self.gamma!r}") from e
        if not gamma >= 0:
            raise ConfigError("gamma", f"must be >= 0, got {self.gamma}")
        object.__setattr__(self, "gamma", gamma)
        if int(self.width) < 1:
            raise ConfigError("width", f"must be >= 1, got {self.width}")
        object.__setattr__(self, "output_dir", Path(self.output_dir))
        object.__setattr__(self, "cache_dir", Path(self.cache_dir))

    @classmethod
    def from_config(cls, cfg=None, **overrides):
        """Build from a loaded config dict; keyword overrides (CLI flags) win."""
        cfg = cfg or load_config()
        sgd = dict(cfg["sgd"])
        width = sgd.pop("width", 300)
        kwargs = {
            "dataset": "random",
            "split_seed": cfg["data"].get("split_seed", 0),
            "width": width,
            "solver": _section(SolverOptions, "solver", cfg["solver"]),
            "rounding": _section(RoundingOptions, "rounding", cfg["rounding"]),
            "sgd": _section(SgdConfig, "sgd", sgd),
            "output_dir": resolve_path(cfg["output"]["dir"]),
            "cache_dir": resolve_path(cfg["data"]["cache_dir"]),
            "registry": cfg.get("datasets", {}),
        }
        kwargs.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**kwargs)

    def with_presets(self):
        """Same experiment with the published SGD learning rate and budget, if listed."""
        preset = reference_tables.sgd_preset(self.dataset, self.gamma)
        if preset is None:
            return self
        lr, iters = preset
        return replace(self, sgd=replace(self.sgd, lr=lr, iters=iters))

    def quick(self):
        """Scaled-down budgets for desk runs."""
        s = self.solver
        solver = replace(s, max_iters=min(s.max_iters, QUICK_MAX_ITERS),
                         eps_abs=max(s.eps_abs, QUICK_EPS_ABS),
                         eps_rel=max(s.eps_rel, QUICK_EPS_REL))
        return replace(
            self,
            solver=solver,
            rounding=replace(self.rounding,
                             iters=min(self.rounding.iters, QUICK_ROUND_ITERS)),
            sgd=replace(self.sgd, iters=min(self.sgd.iters, QUICK_SGD_ITERS),
                        restarts=min(self.sgd.restarts, 2)),
        )

    def to_dict(self):
        out = {}
        for f in dataclasses.fields(self):
            if f.name == "registry":
                continue
            v = getattr(self, f.name)
            out[f.name] = dataclasses.asdict(v) if dataclasses.is_dataclass(v) else v
        out["rounding"]["tie_break"] = self.rounding.tie_break.value
        out["output_dir"] = str(self.output_dir)
        out["cache_dir"] = str(self.cache_dir)
        return out


def _section(cls, name, values):
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"{name}.{unknown[0]}", "unknown option")
    return cls(**values)


def load_dataset(exp: ExperimentConfig, seed: Optional[int] = None):
    ds = data.resolve_dataset(exp.dataset, seed=exp.seed if seed is None else seed,
                              registry=exp.registry, split_seed=exp.split_seed)
    if exp.bias:
        ds = data.add_bias(ds)
    return ds


def run_solve(exp: ExperimentConfig, ds: data.Dataset):
    prob = lifted.build_problem(ds.X_train, ds.Y_train, exp.gamma)
    sol, trace = solve(prob, exp.solver)
    return prob, sol, trace


def run_round(exp: ExperimentConfig, prob, Lambda):
    """Round Lambda to weights; returns (weights, factor, phi history, training loss)."""
    fm, history = tos_round(Lambda, prob, exp.rounding)
    weights = extract_weights(fm, prob.sel)
    loss = training_loss(prob.X, prob.Y, weights, prob.gamma)
    return weights, fm, history, loss


def score_weights(weights, ds: data.Dataset, rule="argmax"):
    if not ds.has_test:
        raise ConfigError("dataset", f"{ds.name} has no test split to evaluate on")
    return evaluation.classify_and_score(forward(ds.X_test, weights), ds.Y_test, rule)


def _diff(value, reference):
    if reference is None or value is None or not np.isfinite(value):
        return None
    return value - reference


def ar_widths(exp: ExperimentConfig, widths=None):
    """SGD widths for an AR row: the published sweep plus the configured width."""
    widths = reference_tables.AR_WIDTHS if widths is None else widths
    return tuple(sorted({int(m) for m in widths} | {exp.width}))


def ar_row(task):
    """One approximation-ratio row: SDP objective vs SGD over a width sweep.

    ``task`` is a plain dict (dataset, gamma, trials, quick, config and
    optionally widths) so rows can be shipped to worker processes. The ratio
    is taken against SGD at the configured width; every swept width gets its
    own ``sgd_<m>`` column and, where published, a ``diff_sgd_<m>`` column.
    Any stage failure marks the row FAILED.
    """
    exp = ExperimentConfig.from_config(task["config"], dataset=task["dataset"],
                                       gamma=task["gamma"], seed=task.get("seed", 0))
    exp = exp.with_presets()
    if task.get("quick"):
        exp = exp.quick()
    row = {"dataset": exp.dataset, "gamma": exp.gamma, "trials": task.get("trials", 1)}
    try:
        widths = ar_widths(exp, task.get("widths"))
        sdp, sgd, seconds = [], {m: [] for m in widths}, []
        for t in range(row["trials"]):
            ds = load_dataset(exp, seed=exp.seed + t)
            t0 = time.perf_counter()
            _, sol, _ = run_solve(exp, ds)
            seconds.append(time.perf_counter() - t0)
            sdp.append(sol.objective)
            sweep = sgd_sweep(ds.X_train, ds.Y_train, exp.gamma, widths, exp.sgd)
            for m, loss in sweep.items():
                sgd[m].append(float(loss))
        sdp = np.asarray(sdp)
        at_width = np.asarray(sgd[exp.width])
        ar = 100.0 * evaluation.approximation_ratio(sdp.mean(), at_width.mean())
        ref = reference_tables.approx_ratio_reference(exp.dataset, exp.gamma) or {}
        ref_sgd = ref.get("sgd", {})
        row.update({
            "status": "OK",
            "sdp_objective": float(sdp.mean()), "sdp_std": float(sdp.std()),
            "sgd_std": float(at_width.std()),
            "ar_percent": ar,
            "runtime_s": float(np.mean(seconds)),
            "ref_sdp": ref.get("sdp"), "ref_ar": ref.get("ar"),
            "ref_runtime": ref.get("runtime"),
            "diff_sdp": _diff(float(sdp.mean()), ref.get("sdp")),
            "diff_ar": _diff(ar, ref.get("ar")),
        })
        for m in widths:
            mean = float(np.mean(sgd[m]))
            row[f"sgd_{m}"] = mean
            row[f"diff_sgd_{m}"] = _diff(mean, ref_sgd.get(m))
    except Exception as e:
        log.exception(f"AR row {exp.dataset} gamma={exp.gamma} failed: {e}")
        row.update({"status": "FAILED", "error": str(e)})
    return row


def prediction_row(task):
    """One prediction-quality row for method ``sdp``, ``sdp-bias`` or ``sgd``."""
    method = task["method"]
    exp = ExperimentConfig.from_config(task["config"], dataset=task["dataset"],
                                       gamma=task["gamma"], bias=method == "sdp-bias",
                                       seed=task.get("seed", 0))
    exp = exp.with_presets()
    if task.get("quick"):
        exp = exp.quick()
    row = {"method": method, "dataset": exp.dataset, "gamma": exp.gamma}
    try:
        ds = load_dataset(exp)
        t0 = time.perf_counter()
        if method == "sgd":
            weights, _ = sgd_train(ds.X_train, ds.Y_train, exp.gamma, exp.width, exp.sgd)
            ref_runtime = None
        else:
            prob, sol, _ = run_solve(exp, ds)
            weights, _, _, loss = run_round(exp, prob, sol.Lambda)
            row.update({"sdp_objective": sol.objective, "rounded_loss": loss,
                        "rounding_gap": evaluation.rounding_gap(sol.objective, loss)})
            ref_runtime = reference_tables.prediction_runtime_reference(exp.dataset, exp.gamma)
        seconds = time.perf_counter() - t0
        report = score_weights(weights, ds)
        ref = reference_tables.prediction_reference(method, exp.dataset, exp.gamma)
        ref = ref or (None, None)
        row.update({
            "status": "OK",
            "weighted_f1": report.weighted_f1, "accuracy": report.accuracy,
            "threshold": report.best_threshold,
            "runtime_s": seconds,
            "ref_f1": ref[0], "ref_accuracy": ref[1], "ref_runtime": ref_runtime,
            "diff_f1": _diff(report.weighted_f1, ref[0]),
            "diff_accuracy": _diff(report.accuracy, ref[1]),
        })
    except Exception as e:
        log.exception(f"Prediction row {method}/{exp.dataset} gamma={exp.gamma} failed: {e}")
        row.update({"status": "FAILED", "error": str(e)})
    return row
