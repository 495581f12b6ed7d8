#!/usr/bin/env python3
"""
sdpNet.py - convex training of two-layer ReLU networks via a lifted SDP

Commands:
  generate   - build (or load) a dataset and store it in the cache
  solve      - solve the lifted SDP, write lambda_star.bin + trace.csv + manifest.json
  round      - round a solved run back to network weights
  train      - train the SGD baseline
  evaluate   - score a run's weights on the test split (threshold sweep)
  reproduce  - regenerate the approximation-ratio (AR) or Prediction table
  status     - summarise an output directory and check its artifact hashes

Exit codes: 0 ok, 1 failure, 2 solver stopped at max_iters.
"""

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from sdpnn import artifacts, data, evaluation, lifted, reference_tables, sdpa
from sdpnn.config import load_config, resolve_path
from sdpnn.conic_solver import write_trace_csv
from sdpnn.errors import ConfigError, NumericalFailure, SdpNnError, StaleArtifactError
from sdpnn.experiment import (
    ExperimentConfig,
    ar_row,
    load_dataset,
    prediction_row,
    run_round,
    run_solve,
    score_weights,
)
from sdpnn.lifted import SolverStatus
from sdpnn.logger import configure_logging, get_logger
from sdpnn.network import NetworkWeights, sgd_train

# exit codes
EXIT_OK = 0
EXIT_FAIL = 1
EXIT_MAXITER = 2

LAMBDA_FILE = "lambda_star.bin"
MANIFEST_FILE = "manifest.json"
WEIGHTS_FILE = "weights.json"

logger = get_logger("cli")


# Helpers


def _experiment(args, cfg):
    return ExperimentConfig.from_config(
        cfg,
        dataset=getattr(args, "dataset", None),
        gamma=getattr(args, "gamma", None),
        bias=getattr(args, "bias", None) or None,
        seed=getattr(args, "seed", None),
    )


def _out_dir(args, exp, command):
    if getattr(args, "out", None):
        out = Path(args.out)
    else:
        tag = f"{command}-{Path(exp.dataset).stem}-g{exp.gamma:g}-s{exp.seed}"
        out = exp.output_dir / tag
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_run(run_dir):
    run_dir = Path(run_dir)
    path = run_dir / MANIFEST_FILE
    if not path.exists():
        raise StaleArtifactError(f"{run_dir}: no {MANIFEST_FILE}")
    return artifacts.load_json(path)


def _experiment_from_manifest(manifest, cfg):
    """Re-create the experiment recorded in a run manifest."""
    rec = manifest["experiment"]
    return ExperimentConfig.from_config(
        cfg, dataset=rec["dataset"], gamma=rec["gamma"], bias=rec["bias"],
        seed=rec["seed"], split_seed=rec["split_seed"], width=rec["width"],
    )


def _check_dataset(manifest, ds):
    expected = manifest.get("dataset", {}).get("hash")
    actual = data.dataset_hash(ds)
    if expected and expected != actual:
        raise StaleArtifactError(
            f"dataset hash {actual[:12]} does not match manifest {expected[:12]}"
        )


def _write_manifest(out, command, exp, files, **extra):
    manifest = artifacts.build_manifest(command, exp.to_dict(), files, **extra)
    manifest["experiment"] = {
        "dataset": exp.dataset, "gamma": exp.gamma, "bias": exp.bias,
        "seed": exp.seed, "split_seed": exp.split_seed, "width": exp.width,
    }
    return artifacts.write_json(out / MANIFEST_FILE, manifest)


# Command implementations


def cmd_generate(args, cfg):
    """Build a dataset and cache it as <hash>.npz + manifest"""
    exp = _experiment(args, cfg)
    ds = load_dataset(exp)
    path = data.cache_dataset(ds, exp.cache_dir)
    print(path)
    logger.info(f"{ds.name}: n={ds.n} d={ds.d} c={ds.c} "
                f"test={ds.X_test.shape[0] if ds.has_test else 0}")
    return EXIT_OK


def cmd_solve(args, cfg):
    """Solve the lifted SDP for one dataset / gamma"""
    exp = _experiment(args, cfg)
    if args.quick:
        exp = exp.quick()
    if args.max_iters:
        exp = replace(exp, solver=replace(exp.solver, max_iters=args.max_iters))
    out = _out_dir(args, exp, "solve")
    ds = load_dataset(exp)
    try:
        prob, sol, trace = run_solve(exp, ds)
    except NumericalFailure as e:
        if e.state is not None:
            artifacts.write_matrix(out / "lambda_partial.bin", e.state.Lambda)
            logger.error(f"Last finite iterate written to {out / 'lambda_partial.bin'}")
        raise

    meta = lifted.problem_metadata(prob, data.dataset_hash(ds))
    files = [
        artifacts.write_matrix(out / LAMBDA_FILE, sol.Lambda),
        artifacts.write_json(out / "lambda_star.json", {**meta, **sol.summary()}),
        write_trace_csv(trace, out / "trace.csv"),
    ]
    if args.sdpa:
        files.append(sdpa.write_sdpa(prob, out / "problem.dat-s"))
    _write_manifest(out, "solve", exp, files, dataset=ds.manifest(), problem=meta,
                    solution=sol.summary(), seconds=trace.seconds)
    logger.info(f"solve: objective={sol.objective:.8g} bound={sol.dual_bound:.8g} "
                f"status={sol.status.value} -> {out}")
    if sol.status is SolverStatus.MAX_ITERATIONS:
        logger.warning("Solver stopped at max_iters; results are not certified optimal")
        return EXIT_MAXITER
    return EXIT_OK


def cmd_round(args, cfg):
    """Round lambda_star.bin of a solve run to network weights"""
    run = Path(args.run)
    manifest = _load_run(run)
    lam_path = run / LAMBDA_FILE
    if not lam_path.exists():
        raise StaleArtifactError(f"{lam_path} is missing")
    artifacts.verify_manifest_entry(manifest, lam_path)
    exp = _experiment_from_manifest(manifest, cfg)
    if args.iters:
        exp = replace(exp, rounding=replace(exp.rounding, iters=args.iters))
    ds = load_dataset(exp)
    _check_dataset(manifest, ds)

    prob = lifted.build_problem(ds.X_train, ds.Y_train, exp.gamma)
    Lambda = artifacts.read_matrix(lam_path)
    weights, fm, history, loss = run_round(exp, prob, Lambda)
    weights.provenance["lambda_sha256"] = manifest["artifacts"][LAMBDA_FILE]
    sdp_obj = manifest.get("solution", {}).get("objective", lifted.objective(prob, Lambda))
    report = {
        "training_loss": loss,
        "sdp_objective": sdp_obj,
        "rounding_gap": evaluation.rounding_gap(sdp_obj, loss),
        "width": weights.m,
        "best_phi": fm.best_phi,
        "best_iteration": fm.best_iteration,
        "last_phi": fm.last_phi,
    }
    w_path = artifacts.write_json(run / WEIGHTS_FILE, weights.to_dict())
    h_path = artifacts.write_csv(run / "phi_history.csv",
                                 {"iteration": np.arange(history.size), "phi": history})
    r_path = artifacts.write_json(run / "round.json", report)
    for p in (w_path, h_path, r_path):
        manifest["artifacts"][p.name] = artifacts.compute_hash(p)
    manifest["round"] = {"options": exp.to_dict()["rounding"], **report}
    artifacts.write_json(run / MANIFEST_FILE, manifest)
    logger.info(f"round: width={weights.m} loss={loss:.8g} "
                f"(SDP {sdp_obj:.8g}, gap {report['rounding_gap']:.3%})")
    return EXIT_OK


def cmd_train(args, cfg):
    """Train the SGD baseline"""
    exp = _experiment(args, cfg)
    if args.preset:
        exp = exp.with_presets()
    if args.quick:
        exp = exp.quick()
    if args.width:
        exp = replace(exp, width=args.width)
    out = _out_dir(args, exp, "train")
    ds = load_dataset(exp)
    weights, curve = sgd_train(ds.X_train, ds.Y_train, exp.gamma, exp.width, exp.sgd)
    files = [
        artifacts.write_json(out / WEIGHTS_FILE, weights.to_dict()),
        artifacts.write_csv(out / "loss_curve.csv", {"record": np.arange(curve.size),
                                                     "loss": curve}),
    ]
    _write_manifest(out, "train", exp, files, dataset=ds.manifest(),
                    training_loss=float(curve[-1]))
    logger.info(f"train: width={exp.width} final loss={curve[-1]:.8g} -> {out}")
    return EXIT_OK


def cmd_evaluate(args, cfg):
    """Score the weights of a run (solve+round or train) on the test split"""
    run = Path(args.run)
    manifest = _load_run(run)
    w_path = run / WEIGHTS_FILE
    if not w_path.exists():
        raise StaleArtifactError(f"{w_path} is missing (run 'round' or 'train' first)")
    artifacts.verify_manifest_entry(manifest, w_path)
    exp = _experiment_from_manifest(manifest, cfg)
    ds = load_dataset(exp)
    _check_dataset(manifest, ds)
    weights = NetworkWeights.from_dict(artifacts.load_json(w_path))
    report = score_weights(weights, ds, rule=args.rule)
    artifacts.write_json(run / "metrics.json", report.to_dict())
    if args.kernel:
        lam_path = run / LAMBDA_FILE
        artifacts.verify_manifest_entry(manifest, lam_path)
        sel = lifted.build_selection_matrices(ds.n, ds.d, ds.c)
        Lambda = artifacts.read_matrix(lam_path)
        K = evaluation.kernel_matrix(Lambda, sel, ds.X_test, ds.X_train)
        artifacts.write_matrix(run / "kernel.bin", K)
    print(f"accuracy={report.accuracy:.4f} weighted_f1={report.weighted_f1:.4f} "
          f"threshold={report.best_threshold:.2f}")
    return EXIT_OK


def cmd_reproduce(args, cfg):
    """Rebuild the AR or Prediction table; failing rows are marked FAILED"""
    gammas = args.gamma or list(reference_tables.PUBLISHED_GAMMAS)
    if args.table == "AR":
        datasets = args.dataset or ["random", "spiral"]
        tasks = [{"dataset": d, "gamma": g, "trials": args.trials, "seed": args.seed or 0,
                  "quick": args.quick, "config": cfg} for d in datasets for g in gammas]
        fn = ar_row
    else:
        datasets = args.dataset or list(reference_tables.PREDICTION_DATASETS)
        methods = args.methods or ["sdp", "sdp-bias", "sgd"]
        tasks = [{"method": m, "dataset": d, "gamma": g, "seed": args.seed or 0,
                  "quick": args.quick, "config": cfg}
                 for d in datasets for g in gammas for m in methods]
        fn = prediction_row
    if args.trials < 1:
        raise ConfigError("trials", f"must be >= 1, got {args.trials}")

    logger.info(f"reproduce {args.table}: {len(tasks)} rows, workers={args.workers}")
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            rows = list(pool.map(fn, tasks))
    else:
        rows = [fn(t) for t in tasks]

    out = Path(args.out) if args.out else None
    if out is None:
        out = resolve_path(cfg["output"]["dir"]) / f"reproduce-{args.table}"
    out.mkdir(parents=True, exist_ok=True)
    table = artifacts.write_csv(out / f"table_{args.table}.csv", rows)
    failed = [r for r in rows if r["status"] == "FAILED"]
    manifest = artifacts.build_manifest(
        "reproduce", cfg, [table], table=args.table, datasets=datasets, gammas=gammas,
        trials=args.trials, quick=args.quick, failed_rows=len(failed),
        reference_source=reference_tables.APPROX_RATIO["source"] if args.table == "AR"
        else reference_tables.PREDICTION["source"],
    )
    artifacts.write_json(out / MANIFEST_FILE, manifest)
    print(table)
    if failed:
        logger.warning(f"{len(failed)} of {len(rows)} rows FAILED")
    return EXIT_OK


def cmd_status(args, cfg):
    run = Path(args.run)
    manifest = _load_run(run)
    logger.info(f"command: {manifest.get('command')} at {manifest.get('created_at')}")
    stale = 0
    for name in manifest.get("artifacts", {}):
        try:
            artifacts.verify_manifest_entry(manifest, run / name)
            state = "OK"
        except (StaleArtifactError, OSError):
            state = "STALE"
            stale += 1
        logger.info(f"{name}: {state}")
    for key in ("solution", "round"):
        if key in manifest:
            summary = {k: v for k, v in manifest[key].items() if not isinstance(v, dict)}
            logger.info(f"{key}: {summary}")
    return EXIT_FAIL if stale else EXIT_OK


# CLI setup
def build_parser():
    p = argparse.ArgumentParser(
        prog="sdpNet", description="Convex training of two-layer ReLU networks"
    )
    p.add_argument("--config", help="Alternate config.json")
    p.add_argument("--log-level", help="Console log level (overrides config)")
    sp = p.add_subparsers(dest="command")

    def experiment_args(q):
        q.add_argument("--dataset", default=None,
                       help="random, spiral, a registry name or a CSV/NPZ path")
        q.add_argument("--gamma", type=float, default=None)
        q.add_argument("--seed", type=int, default=None)
        q.add_argument("--bias", action="store_true", help="Append a constant input feature")
        q.add_argument("--out", help="Output directory")

    experiment_args(sp.add_parser("generate", help="Build and cache a dataset"))
    sv = sp.add_parser("solve", help="Solve the lifted SDP")
    experiment_args(sv)
    sv.add_argument("--max-iters", type=int, default=None)
    sv.add_argument("--quick", action="store_true", help="Loose tolerances for desk runs")
    sv.add_argument("--sdpa", action="store_true",
                    help="Also export the problem in SDPA format")

    rd = sp.add_parser("round", help="Round a solve run to network weights")
    rd.add_argument("--run", required=True, help="Output directory of a solve run")
    rd.add_argument("--iters", type=int, default=None)

    tr = sp.add_parser("train", help="Train the SGD baseline")
    experiment_args(tr)
    tr.add_argument("--width", type=int, default=None)
    tr.add_argument("--preset", action="store_true",
                    help="Use the published learning rate / budget")
    tr.add_argument("--quick", action="store_true")

    ev = sp.add_parser("evaluate", help="Threshold-swept accuracy and F1 of a run's weights")
    ev.add_argument("--run", required=True)
    ev.add_argument("--rule", choices=evaluation.RULES, default="argmax")
    ev.add_argument("--kernel", action="store_true",
                    help="Also write the expected kernel matrix")

    rp = sp.add_parser("reproduce", help="Rebuild a results table")
    rp.add_argument("table", choices=["AR", "Prediction"])
    rp.add_argument("--dataset", action="append")
    rp.add_argument("--gamma", type=float, action="append")
    rp.add_argument("--methods", action="append", choices=["sdp", "sdp-bias", "sgd"])
    rp.add_argument("--trials", type=int, default=1)
    rp.add_argument("--seed", type=int, default=0)
    rp.add_argument("--workers", type=int, default=1)
    rp.add_argument("--quick", action="store_true", help="Scaled-down iteration budgets")
    rp.add_argument("--out")

    st = sp.add_parser("status", help="Summarise an output directory")
    st.add_argument("--run", required=True)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_FAIL
    log_cfg = cfg["logging"]
    configure_logging(
        level=args.log_level or log_cfg.get("level", "INFO"),
        color=log_cfg.get("color", True),
        log_dir=resolve_path(log_cfg.get("dir", "logs")),
    )

    cmd = args.command
    if cmd == "generate":
        handler = cmd_generate
    elif cmd == "solve":
        handler = cmd_solve
    elif cmd == "round":
        handler = cmd_round
    elif cmd == "train":
        handler = cmd_train
    elif cmd == "evaluate":
        handler = cmd_evaluate
    elif cmd == "reproduce":
        handler = cmd_reproduce
    elif cmd == "status":
        handler = cmd_status
    else:
        parser.print_help()
        return EXIT_OK

    try:
        return_code = handler(args, cfg)
    except (SdpNnError, OSError) as e:
        logger.error(f"{cmd}: {e}")
        return_code = EXIT_FAIL
    except Exception as e:
        logger.exception(f"{cmd}: unexpected error: {e}")
        return_code = EXIT_FAIL

    # log final state
    if return_code == EXIT_OK:
        logger.info(f"Command '{cmd}' finished successfully")
    elif return_code == EXIT_MAXITER:
        logger.warning(f"Command '{cmd}' stopped at max_iters (exit code {return_code})")
    else:
        logger.error(f"Command '{cmd}' failed (exit code {return_code})")
    return return_code


if __name__ == "__main__":
    sys.exit(main())
