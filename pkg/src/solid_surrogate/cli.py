"""
Command-line entry point for scripted, reproducible surrogate runs.

Usage:
    solid-surrogate gen-data [--config PATH] [--out DIR]
    solid-surrogate train --data DIR [--stage auto|gp|both]
    solid-surrogate predict --model DIR FORCE [FORCE ...]
    solid-surrogate evaluate --model DIR --data DIR
    solid-surrogate experiment-missing --data DIR
    solid-surrogate fem-solve FORCE [FORCE ...]

Every command accepts --config, --seed, --threads, --out and --log-level.
Outputs go under the output directory and carry the resolved configuration.
Failures exit with a stable non-zero code and one JSON error line on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from .config import RunConfig, load_config
from .core.errors import DataError, handle_cli_exception
from .core.tracing import configure_logging, new_run_id
from .datastore import (
    read_autoencoder,
    read_dataset,
    read_model,
    read_model_manifest,
    to_jsonable,
    write_dataset,
    write_model,
    write_report,
)
from .fem import LoadSpec, build_cantilever_mesh, generate_dataset, solve_static
from .surrogate import (
    SurrogateModel,
    TrainingReport,
    evaluate_testset,
    missing_region_experiment,
    predict_full,
    showcase_case,
    train_autoencoder_stage,
    train_gp_stage,
    train_pipeline,
)

logger = logging.getLogger("surrogate.cli")


# ---------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------

def _emit(payload: Dict[str, Any]) -> None:
    """One JSON line on stdout describing what a command produced."""
    sys.stdout.write(json.dumps(to_jsonable(payload), sort_keys=True, default=str) + "\n")


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    out: Dict[str, Any] = {}
    if args.seed is not None:
        out["data"] = {"seed": args.seed}
        out["training"] = {"seed": args.seed}
        out["gp"] = {"seed": args.seed}
        out["surrogate"] = {"mc_seed": args.seed}
        out["experiment"] = {"seed": args.seed}
    if args.threads is not None:
        out["threads"] = args.threads
    if args.out is not None:
        out["out_dir"] = args.out
    if args.log_level is not None:
        out["log_level"] = args.log_level
    if getattr(args, "n_train", None) is not None:
        out.setdefault("data", {})["n_train"] = args.n_train
    if getattr(args, "n_test", None) is not None:
        out.setdefault("data", {})["n_test"] = args.n_test
    if getattr(args, "epochs", None) is not None:
        out.setdefault("training", {})["epochs"] = args.epochs
    return out


def _out(cfg: RunConfig, *parts: str) -> Path:
    path = Path(cfg.out_dir, *parts)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _node_rows(values: np.ndarray, columns: Dict[str, np.ndarray]) -> List[Dict[str, Any]]:
    rows = []
    for dof in range(values.size):
        rows.append({
            "dof": dof,
            "node": dof // 2,
            "component": "x" if dof % 2 == 0 else "y",
            **{name: float(col[dof]) for name, col in columns.items()},
        })
    return rows


# ---------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------

def cmd_gen_data(cfg: RunConfig, args: argparse.Namespace) -> Dict[str, Any]:
    mesh = build_cantilever_mesh(cfg.mesh)
    produced = {}
    for name, stream, n in (("train", 0, cfg.data.n_train), ("test", 1, cfg.data.n_test)):
        dataset = generate_dataset(
            mesh,
            cfg.material,
            cfg.data.load_kind,
            cfg.data.force_range,
            n,
            cfg.data.seed,
            cfg.solver,
            stream=stream,
            threads=cfg.threads,
        )
        directory = _out(cfg, "data", name)
        manifest = write_dataset(directory, dataset, config=cfg.echo())
        produced[name] = {
            "path": str(directory),
            "checksum": json.loads(manifest.read_text())["checksum"],
            "failures": dataset.metadata["failure_count"],
        }
    return {"command": "gen-data", **produced}


def cmd_train(cfg: RunConfig, args: argparse.Namespace) -> Dict[str, Any]:
    dataset = read_dataset(args.data)
    model_dir = Path(args.model) if args.model else _out(cfg, "model")
    spec = cfg.ae_spec(dataset.field_dim)

    if args.stage == "auto":
        autoencoder, history = train_autoencoder_stage(dataset, spec, cfg.train_config())
        report = TrainingReport(autoencoder_history=history)
        write_model(model_dir, autoencoder, report=report, config=cfg.echo())
        return {
            "command": "train",
            "stage": "auto",
            "model": str(model_dir),
            "final_loss": history.final_loss,
            "reconstruction_error": history.reconstruction_error,
        }

    if args.stage == "gp":
        autoencoder = read_autoencoder(model_dir)
        previous = read_model_manifest(model_dir).autoencoder.training or {}
        bundle, _ = train_gp_stage(autoencoder, dataset, cfg.gp_config())
        model = SurrogateModel(
            autoencoder=autoencoder,
            bundle=bundle,
            sample_count=cfg.surrogate.sample_count,
            mc_seed=cfg.surrogate.mc_seed,
        )
        training = {"autoencoder": previous.get("autoencoder"), "gp": bundle.summary()}
        write_model(model_dir, model, report=training, config=cfg.echo())
        return {"command": "train", "stage": "gp", "model": str(model_dir), "gp": bundle.summary()}

    model, report = train_pipeline(
        dataset, spec, cfg.train_config(), cfg.gp_config(), cfg.surrogate
    )
    write_model(model_dir, model, report=report, config=cfg.echo())
    return {"command": "train", "stage": "both", "model": str(model_dir), **report.as_dict()}


def cmd_predict(cfg: RunConfig, args: argparse.Namespace) -> Dict[str, Any]:
    model = read_model(args.model)
    force = np.asarray(args.force, dtype=float)
    pred = predict_full(model, force)
    directory = _out(cfg, "predict")
    write_report(
        directory,
        "prediction",
        _node_rows(pred.mean, {"mean": pred.mean, "std": pred.std, "variance": pred.variance}),
        summary={"force": force, "sample_count": model.sample_count, "mc_seed": model.mc_seed},
        config=cfg.echo(),
    )
    latent_rows = [
        {
            "component": l,
            "mean": float(pred.latent_means[l]),
            "variance": float(pred.latent_vars[l]),
            "std": float(np.sqrt(pred.latent_vars[l])),
        }
        for l in range(pred.latent_means.size)
    ]
    write_report(directory, "latents", latent_rows, config=cfg.echo())
    return {
        "command": "predict",
        "out": str(directory),
        "max_abs_mean": float(np.abs(pred.mean).max()),
    }


def cmd_evaluate(cfg: RunConfig, args: argparse.Namespace) -> Dict[str, Any]:
    model = read_model(args.model)
    dataset = read_dataset(args.data)
    evaluation = evaluate_testset(model, dataset, threads=cfg.threads)
    metrics, health = evaluation.metrics, evaluation.health

    rows = []
    for i, entry in enumerate(health.entries):
        err = evaluation.errors[i]
        rows.append({
            "case": i,
            **{f"f_{k}": float(v) for k, v in enumerate(dataset.forces[i])},
            "mean_error": float(metrics.case_errors[i]),
            "max_e_f": float(err.e_f.max()),
            "max_e_r": float(err.e_r.max()),
            "max_e_gp": float(err.e_gp.max()),
            "healthy_latents": int(entry.healthy.sum()),
            "correct": bool(entry.correct),
        })
    summary = {
        **metrics.as_dict(),
        "healthy_percent": health.healthy_percent,
        "correct_percent": health.correct_percent,
        "healthy_percent_per_component": health.per_component_percent(),
        "triangle_violations": evaluation.triangle_violations(),
    }
    directory = _out(cfg, "evaluate", args.name)
    write_report(directory, "cases", rows, summary=summary, config=cfg.echo())

    if dataset.field_dim % 2 == 0:
        showcase = showcase_case(evaluation, dataset)
        write_report(
            directory,
            "showcase",
            showcase.rows(),
            summary={
                "case_index": showcase.case_index,
                "force": showcase.force,
                "gp_error_within_band": showcase.gp_error_within_band,
            },
            config=cfg.echo(),
        )
    return {"command": "evaluate", "out": str(directory), **summary}


def cmd_experiment_missing(cfg: RunConfig, args: argparse.Namespace) -> Dict[str, Any]:
    dataset = read_dataset(args.data)
    mesh = build_cantilever_mesh(cfg.mesh)
    if dataset.field_dim != mesh.dof_count:
        raise DataError(
            f"Dataset field dimension {dataset.field_dim} does not match the configured mesh "
            f"({mesh.dof_count} DOFs)."
        )
    result, model = missing_region_experiment(
        dataset,
        mesh,
        cfg.material,
        cfg.ae_spec(dataset.field_dim),
        cfg.train_config(),
        cfg.gp_config(),
        cfg.surrogate,
        cfg.solver,
        cfg.experiment,
        force_half_range=cfg.data.force_half_range,
    )
    directory = _out(cfg, "experiment-missing")
    summary = {
        "mask_radius": result.mask_radius,
        "force_half_range": result.force_half_range,
        "n_train": result.n_train,
        "n_removed": result.n_removed,
        **result.summary,
    }
    write_report(directory, "sweep", result.sweep, summary=summary, config=cfg.echo())
    write_report(directory, "scatter", result.scatter, summary=summary, config=cfg.echo())
    if args.save_model:
        write_model(directory / "model", model, config=cfg.echo())
    return {"command": "experiment-missing", "out": str(directory), **summary}


def cmd_fem_solve(cfg: RunConfig, args: argparse.Namespace) -> Dict[str, Any]:
    mesh = build_cantilever_mesh(cfg.mesh)
    load = LoadSpec.from_vector(cfg.data.load_kind, np.asarray(args.force, dtype=float))
    solution = solve_static(mesh, cfg.material, load, cfg.solver)
    nodal = solution.nodal()
    rows = [
        {
            "node": n,
            "x": float(mesh.node_coords[n, 0]),
            "y": float(mesh.node_coords[n, 1]),
            "ux": float(nodal[n, 0]),
            "uy": float(nodal[n, 1]),
        }
        for n in range(mesh.n_nodes)
    ]
    summary = {
        "force": load.components,
        "newton_iterations": solution.newton_iterations,
        "residual_norm": solution.residual_norm,
        "residual_history": list(solution.residual_history),
        "max_displacement": float(np.linalg.norm(nodal, axis=1).max()),
    }
    directory = _out(cfg, "fem-solve")
    write_report(directory, "displacements", rows, summary=summary, config=cfg.echo())
    return {"command": "fem-solve", "out": str(directory), **summary}


COMMANDS: Dict[str, Callable[[RunConfig, argparse.Namespace], Dict[str, Any]]] = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "experiment-missing": cmd_experiment_missing,
    "fem-solve": cmd_fem_solve,
}


# ---------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="JSON run configuration file.")
    common.add_argument("--seed", type=int, default=None, help="Master seed for every stage.")
    common.add_argument("--threads", type=int, default=None, help="Worker threads (default 1).")
    common.add_argument("--out", type=str, default=None, help="Output root directory.")
    common.add_argument(
        "--log-level",
        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
        default=None,
    )

    parser = argparse.ArgumentParser(
        prog="solid-surrogate",
        description="Probabilistic full-field surrogate for hyperelastic solids.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-data", parents=[common], help="Generate train/test datasets.")
    gen.add_argument("--n-train", type=int, default=None)
    gen.add_argument("--n-test", type=int, default=None)

    train = sub.add_parser("train", parents=[common], help="Train the surrogate.")
    train.add_argument("--data", type=Path, required=True, help="Training dataset directory.")
    train.add_argument("--model", type=Path, default=None, help="Model archive directory.")
    train.add_argument("--stage", choices=["auto", "gp", "both"], default="both")
    train.add_argument("--epochs", type=int, default=None)

    predict = sub.add_parser("predict", parents=[common], help="Predict one load case.")
    predict.add_argument("--model", type=Path, required=True)
    predict.add_argument("force", type=float, nargs="+", help="Force components.")

    evaluate = sub.add_parser("evaluate", parents=[common], help="Evaluate on a dataset.")
    evaluate.add_argument("--model", type=Path, required=True)
    evaluate.add_argument("--data", type=Path, required=True)
    evaluate.add_argument("--name", default="test", help="Subdirectory name of the report.")

    exp = sub.add_parser(
        "experiment-missing", parents=[common], help="Missing-region uncertainty experiment."
    )
    exp.add_argument("--data", type=Path, required=True)
    exp.add_argument("--epochs", type=int, default=None)
    exp.add_argument("--save-model", action="store_true")

    fem = sub.add_parser("fem-solve", parents=[common], help="Solve one FEM load case.")
    fem.add_argument("force", type=float, nargs="+", help="Force components.")

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    run_id = new_run_id()
    try:
        cfg = load_config(args.config, _overrides(args))
        configure_logging(cfg.log_level)
        logger.info("Run %s: %s", run_id, args.command)
        _emit(COMMANDS[args.command](cfg, args))
    except Exception as exc:
        return handle_cli_exception(exc)
    return 0


if __name__ == "__main__":
    sys.exit(main())
