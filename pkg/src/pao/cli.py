"""Command-line entry point: ``pao <subcommand> [--config F] [--seed N] [--out DIR] [--scene F] [--s LIST]``.

Failures exit with status 1 (2 for usage errors) and print one JSON
object ``{"error": ..., "type": ...}`` on stderr.
"""

from __future__ import annotations

import argparse
from dataclasses import replace
import json
import math
from pathlib import Path
import sys

import numpy as np

from .bench import experiments as ex
from .codebook import beam_subset
from .datasets import Dataset, gen_dataset, gen_experimental
from .localize import evaluate_rmse, fine_tune, leave_one_location_out, new_localizer, train
from .mlp import MlpModel
from .pao import pao_loop
from .scene import load_scene


class UsageError(Exception):
    pass


def _s_list(text: str | None) -> list[int] | None:
    if text is None:
        return None
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"--s expects a comma-separated list of integers, got {text!r}") from None
    if not vals:
        raise UsageError("--s is empty")
    return vals


def _config(args) -> ex.ExperimentConfig:
    cfg = ex.ExperimentConfig.from_json(args.config) if args.config else ex.ExperimentConfig()
    over = {}
    if args.seed is not None:
        over["seeds"] = [args.seed]
    if args.out is not None:
        over["out"] = args.out
    if args.scene is not None:
        over["scene"] = args.scene
    s = _s_list(args.s)
    if s is not None:
        over["s_list"] = s
    return ex.ExperimentConfig.from_dict({**cfg.to_dict(), **over}) if over else cfg


def _single_s(cfg: ex.ExperimentConfig, args) -> int:
    if args.s is None:
        return cfg.budget_s
    if len(cfg.s_list) != 1:
        raise UsageError(f"{args.cmd} takes a single --s value")
    return cfg.s_list[0]


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True, default=float))


# -- subcommands ----------------------------------------------------------------------


def cmd_gen_dataset(cfg, args):
    out = ex._outdir(cfg.out)
    twin = load_scene(cfg.scene)
    written = []
    for seed in cfg.seeds:
        if args.target:
            ds = gen_experimental(twin.perturbed(np.random.default_rng([seed, 7]), cfg.rho_jitter), seed,
                                  cfg.n_sweeps, cfg.noise_db)
            name = f"target_seed{seed}.csv"
        else:
            ds = gen_dataset(twin, args.n or cfg.n_train, seed=seed)
            name = f"source_seed{seed}.csv"
        if args.s is not None:
            ds = ds.subset_beams(_single_s(cfg, args))
        ds.save(out / name)
        written.append({"file": str(out / name), "rows": len(ds), "S": ds.s})
    _emit({"datasets": written})


def cmd_train(cfg, args):
    out = ex._outdir(cfg.out)
    twin = load_scene(cfg.scene)
    rows = []
    for seed in cfg.seeds:
        if args.data:
            full = Dataset.load(args.data)
            if full.s != 63:
                raise UsageError("--data must hold all 63 codebook columns")
            te = None
        else:
            wb = ex.Workbench(cfg)
            full, te = wb.source_data(seed)
        for s in cfg.s_list:
            model = new_localizer(twin, s, seed, tuple(cfg.hidden))
            model, trace = train(model, full.subset_beams(s), cfg.train_config(seed))
            model.meta.update({"S": s, "seed": seed, "stage": "pretrained"})
            path = out / f"model_s{s}_seed{seed}.json"
            model.save(path)
            row = {"S": s, "seed": seed, "model": str(path), "final_loss": trace[-1]}
            if te is not None:
                row["test_rmse_m"] = evaluate_rmse(model, te.subset_beams(s))
            rows.append(row)
    ex.write_csv(out / "train_summary.csv", ["S", "seed", "final_loss", "test_rmse_m"],
                 [[r["S"], r["seed"], float(r["final_loss"]), float(r.get("test_rmse_m", math.nan))] for r in rows])
    _emit({"models": rows})


def cmd_finetune(cfg, args):
    if not args.model:
        raise UsageError("finetune needs --model")
    model = MlpModel.load(args.model)
    seed = cfg.seeds[0]
    wb = ex.Workbench(cfg)
    ds = Dataset.load(args.data) if args.data else wb.target_data(seed)
    if ds.s != model.n_in:
        ds = ds.subset_beams(model.n_in)
    tuned, trace = fine_tune(model, ds, cfg.frozen_layers, cfg.finetune_config(seed))
    out = ex._outdir(cfg.out)
    path = out / (Path(args.model).stem + "_ft.json")
    tuned.save(path)
    ex.write_csv(out / (Path(args.model).stem + "_ft_loss.csv"), ["epoch", "loss"],
                 [[i + 1, float(v)] for i, v in enumerate(trace)])
    _emit({"model": str(path), "final_loss": trace[-1], "rmse_before_m": evaluate_rmse(model, ds),
           "rmse_after_m": evaluate_rmse(tuned, ds)})


def cmd_loo_eval(cfg, args):
    seed = cfg.seeds[0]
    wb = ex.Workbench(cfg)
    if args.model:
        model = MlpModel.load(args.model)
        ds = wb.target_data(seed).subset_beams(model.n_in)
        folds = leave_one_location_out(model, ds, cfg.frozen_layers, cfg.finetune_config(seed))
        labels = ds.meta["locations"]
        rows = [{"location": labels[f.location], "rmse_pretrained_m": f.rmse_pretrained,
                 "rmse_finetuned_m": f.rmse_finetuned} for f in folds]
        ex.write_csv(ex._outdir(cfg.out) / "loo.csv", ["location", "rmse_pretrained_m", "rmse_finetuned_m"],
                     [list(r.values()) for r in rows])
    else:
        rows = ex.leave_one_out_table(cfg, _single_s(cfg, args), seed, wb, cfg.out)
    _emit({"folds": rows, "mean_pretrained_m": float(np.mean([r["rmse_pretrained_m"] for r in rows])),
           "mean_finetuned_m": float(np.mean([r["rmse_finetuned_m"] for r in rows]))})


def cmd_optimize(cfg, args):
    s = _single_s(cfg, args)
    seed = cfg.seeds[0]
    wb = ex.Workbench(cfg)
    cases = wb.eval_cases(seed)
    labels = [c.label for c in cases]
    loc = args.location or labels[0]
    if loc not in labels:
        raise UsageError(f"unknown location {loc!r}")
    k = labels.index(loc)
    case = cases[k]
    model = MlpModel.load(args.model) if args.model else wb.case_model(s, seed, case)
    gt = wb.ground_truth(seed, k, case)
    mv = gt.measure(beam_subset(wb.cb, model.n_in))
    opt = cfg.optimizer_config(seed=seed)
    res = pao_loop(mv, model, wb.twin, opt)
    out = ex._outdir(cfg.out)
    ex.write_csv(out / "optimize_trace.csv", ["evaluations", "best_twin_sinr_db"],
                 [[e, float(v)] for e, v in res.sinr_trace])
    _emit({"location": loc, "theta_hat_deg": [res.theta_hat.az_deg, res.theta_hat.el_deg],
           "twin_sinr_db": res.sinr_db, "true_sinr_db": gt.true_sinr_db(res.theta_hat),
           "evaluations": res.evaluations, "real_measurements": gt.charges,
           "positions_used": res.positions_used.tolist(), "optimizer": opt.kind})


def cmd_rmse_vs_s(cfg, args):
    r = ex.run_rmse_vs_s(cfg, out=cfg.out)
    _emit({k: r[k] for k in ("s", "rmse_m", "trend_ok")})


def cmd_bench_interp(cfg, args):
    r = ex.run_interpolation_benchmark(cfg, out=cfg.out)
    _emit({k: r[k] for k in ("s", "pao_db", "baseline_db")})


def cmd_bench_budget(cfg, args):
    if args.s is not None:
        cfg = replace(cfg, budget_s=_single_s(cfg, args))
    r = ex.run_budget_curves(cfg, out=cfg.out)
    _emit({"S": r["S"], "pao_cost": r["pao_cost"], "gbo_dms_final_db": r["gbo_dms_final_db"],
           "methods": {m: {k: v for k, v in d.items() if k != "curve"} for m, d in r["methods"].items()}})


def cmd_heatmap(cfg, args):
    if args.location:
        cfg = replace(cfg, heatmap_location=args.location)
    r = ex.render_heatmap(cfg, out=cfg.out, s=_single_s(cfg, args))
    _emit({"location": r["location"], "pearson_r": r["pearson_r"], "position_rmse_m": r["position_rmse_m"]})


def cmd_sinr_mismatch(cfg, args):
    r = ex.run_sinr_mismatch(cfg, out=cfg.out)
    _emit({str(s): {"bin_position_rmse_m": v["bin_x"].tolist(), "bin_sinr_mismatch_db": v["bin_y"].tolist(),
                    "non_decreasing": v["non_decreasing"]} for s, v in r.items()})


COMMANDS = {
    "gen-dataset": (cmd_gen_dataset, "generate twin (or experimental stand-in) datasets"),
    "train": (cmd_train, "pre-train localizers for each S"),
    "finetune": (cmd_finetune, "fine-tune a saved localizer on target data"),
    "loo-eval": (cmd_loo_eval, "leave-one-location-out evaluation on target data"),
    "optimize": (cmd_optimize, "run the closed loop at one evaluation location"),
    "rmse-vs-s": (cmd_rmse_vs_s, "localization RMSE as a function of S"),
    "bench-interp": (cmd_bench_interp, "PAO versus the interpolation baseline"),
    "bench-budget": (cmd_bench_budget, "real-measurement budget curves"),
    "heatmap": (cmd_heatmap, "true versus predicted per-beam received power"),
    "sinr-mismatch": (cmd_sinr_mismatch, "position error versus SINR mismatch"),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="experiment config (JSON)")
    common.add_argument("--seed", type=int, help="run a single seed instead of the configured list")
    common.add_argument("--out", help="output directory")
    common.add_argument("--scene", help="scene file (JSON); defaults to the bundled office")
    common.add_argument("--s", help="comma-separated S values")
    p = _Parser(prog="pao", description="Position-aware relay beam optimization bench.")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    for name, (_, help_) in COMMANDS.items():
        sp = sub.add_parser(name, parents=[common], help=help_)
        if name == "gen-dataset":
            sp.add_argument("--n", type=int, help="sample count (default: n_train)")
            sp.add_argument("--target", action="store_true", help="experimental-layout data from the perturbed scene")
        if name in ("train", "finetune"):
            sp.add_argument("--data", help="dataset CSV")
        if name in ("finetune", "loo-eval", "optimize"):
            sp.add_argument("--model", help="saved model JSON")
        if name in ("optimize", "heatmap"):
            sp.add_argument("--location", help="evaluation location label, e.g. B1")
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = _config(args)
        COMMANDS[args.cmd][0](cfg, args)
        return 0
    except UsageError as e:
        print(json.dumps({"error": str(e), "type": "usage"}), file=sys.stderr)
        return 2
    except Exception as e:  # report every failure as JSON
        print(json.dumps({"error": str(e), "type": type(e).__name__}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
