"""Experiment runners: localization curves, the interpolation and direct-search
baselines, measurement-budget curves, heatmaps and the SINR-mismatch study.

Every runner takes an :class:`ExperimentConfig`, returns plain Python
results and, when given an output directory, writes CSV files (the
authoritative artifact) next to SVG figures.  A :class:`Workbench` caches
datasets and trained models so several runners can share them.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace
import csv
import json
import math
from pathlib import Path

import numpy as np

from ..array import Angles
from ..channel import SinrModel
from ..codebook import Codebook, beam_subset, beam_subset_indices, build_codebook
from ..datasets import Dataset, experimental_layout, gen_dataset, gen_experimental
from ..localize import evaluate_rmse, fine_tune, new_localizer, predict, train
from ..measurement import GroundTruth, MeasurementVector
from ..mlp import MlpModel, TrainConfig
from ..optim import OptimizerConfig, PaoResult, ga_optimize, gbo_optimize
from ..pao import optimize_at, pao_loop, twin_objective
from ..scene import Scene, load_scene

S_SEQUENCE = (3, 5, 7, 11, 21, 63)


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    name: str = "office"
    scene: str | None = None
    out: str = "out"
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2, 3, 4])
    s_list: list[int] = field(default_factory=lambda: list(S_SEQUENCE))
    n_train: int = 10_000
    n_test: int = 2_000
    rho_jitter: float = 0.2
    noise_db: float = 1.0
    n_sweeps: int = 20
    hidden: list[int] = field(default_factory=lambda: [128, 128, 64])
    pretrain: dict = field(default_factory=lambda: {"epochs": 200, "batch_size": 64, "lr": 1e-3})
    finetune: dict = field(default_factory=lambda: {"epochs": 30, "batch_size": 64, "lr": 1e-4})
    frozen_layers: int = 2
    optimizer: dict = field(default_factory=lambda: {"kind": "GA"})
    eval_positions: str = "random"
    n_eval_random: int = 30
    budget_s: int = 11
    dms_list: list[int] = field(default_factory=lambda: [25, 50, 75, 100])
    baseline_max_evals: int = 2400
    baseline_dms: int = 100
    heatmap_location: str = "B1"
    mismatch_samples: int = 200
    mismatch_bins: int = 5

    def __post_init__(self):
        if not self.s_list or any(not 1 <= s <= 63 for s in self.s_list):
            raise ConfigError("S values must lie in 1..63")
        if not 1 <= self.budget_s <= 63:
            raise ConfigError("budget_s must lie in 1..63")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if self.scene is not None and not Path(self.scene).is_file():
            raise ConfigError(f"scene file not found: {self.scene}")
        if self.eval_positions not in ("experimental", "random"):
            raise ConfigError("eval_positions must be 'experimental' or 'random'")
        if self.n_train < 1 or self.n_test < 1:
            raise ConfigError("dataset sizes must be positive")
        if self.mismatch_bins < 1 or self.mismatch_samples < self.mismatch_bins:
            raise ConfigError("need at least one sample per mismatch bin")
        for key, cls in (("pretrain", TrainConfig), ("finetune", TrainConfig), ("optimizer", OptimizerConfig)):
            known = {f.name for f in fields(cls)}
            bad = set(getattr(self, key)) - known
            if bad:
                raise ConfigError(f"unknown {key} keys: {sorted(bad)}")
        self.optimizer_config()

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        bad = set(d) - known
        if bad:
            raise ConfigError(f"unknown config keys: {sorted(bad)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path: str | Path) -> "ExperimentConfig":
        try:
            d = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as e:
            raise ConfigError(f"config is not valid JSON: {e}") from None
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(d)

    def to_dict(self) -> dict:
        return asdict(self)

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(**{**self.pretrain, "seed": seed})

    def finetune_config(self, seed: int) -> TrainConfig:
        return TrainConfig(**{**self.finetune, "seed": seed})

    def optimizer_config(self, **over) -> OptimizerConfig:
        d = dict(self.optimizer)
        for k in ("az_bounds", "el_bounds"):
            if k in d:
                d[k] = tuple(d[k])
        d.update(over)
        try:
            return OptimizerConfig(**d)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"bad optimizer config: {e}") from None


@dataclass(frozen=True)
class EvalCase:
    """One evaluation placement: a label, its location group (if any) and p_0..p_K."""
    label: str
    group: int | None
    positions: np.ndarray


class Workbench:
    """Lazily builds and caches everything the runners share for one config."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.twin: Scene = load_scene(cfg.scene)
        self.cb: Codebook = build_codebook()
        self._cache: dict = {}

    def _memo(self, key, build):
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    # -- scenes and data ---------------------------------------------------------

    def truth(self, seed: int) -> Scene:
        """Hidden ground-truth scene: the twin with jittered reflection coefficients."""
        return self._memo(("truth", seed),
                          lambda: self.twin.perturbed(np.random.default_rng([seed, 7]), self.cfg.rho_jitter))

    def source_data(self, seed: int) -> tuple[Dataset, Dataset]:
        """Full-codebook twin train/test sets."""
        c = self.cfg
        return self._memo(("source", seed), lambda: (
            gen_dataset(self.twin, c.n_train, seed=seed, cb=self.cb),
            gen_dataset(self.twin, c.n_test, seed=100_000 + seed, cb=self.cb)))

    def target_data(self, seed: int) -> Dataset:
        """Experimental-campaign stand-in from the ground-truth scene."""
        return self._memo(("target", seed), lambda: gen_experimental(
            self.truth(seed), seed, self.cfg.n_sweeps, self.cfg.noise_db, self.cb))

    # -- models ----------------------------------------------------------------

    def pretrained(self, s: int, seed: int) -> MlpModel:
        def build():
            tr, _ = self.source_data(seed)
            model = new_localizer(self.twin, s, seed, tuple(self.cfg.hidden))
            model, trace = train(model, tr.subset_beams(s, self.cb), self.cfg.train_config(seed))
            model.meta.update({"S": s, "seed": seed, "stage": "pretrained", "final_loss": trace[-1]})
            return model
        return self._memo(("pre", s, seed), build)

    def finetuned(self, s: int, seed: int, exclude: int | None) -> MlpModel:
        """Pre-trained model refined on the target data, leaving out location ``exclude``."""
        def build():
            ds = self.target_data(seed).subset_beams(s, self.cb)
            if exclude is not None:
                ds = ds.take(np.flatnonzero(ds.groups != exclude))
            model, _ = fine_tune(self.pretrained(s, seed), ds, self.cfg.frozen_layers,
                                 self.cfg.finetune_config(seed))
            model.meta.update({"stage": "finetuned", "excluded": exclude})
            return model
        return self._memo(("ft", s, seed, exclude), build)

    def case_model(self, s: int, seed: int, case: EvalCase) -> MlpModel:
        if case.group is None:
            return self.pretrained(s, seed)
        return self.finetuned(s, seed, case.group)

    # -- evaluation placements -------------------------------------------------------

    def eval_cases(self, seed: int) -> list[EvalCase]:
        def build():
            truth = self.truth(seed)
            if self.cfg.eval_positions == "experimental":
                spots, labels = experimental_layout(truth)
                ints = np.concatenate([n.position for n in truth.interferers])
                return [EvalCase(lab, i, np.concatenate([p, ints])) for i, (p, lab) in enumerate(zip(spots, labels))]
            ds = gen_dataset(self.twin, self.cfg.n_eval_random, s=1, seed=200_000 + seed, cb=self.cb)
            return [EvalCase(f"R{i + 1}", None, p) for i, p in enumerate(ds.positions)]
        return self._memo(("cases", seed), build)

    def ground_truth(self, seed: int, idx: int, case: EvalCase, stream: int = 0) -> GroundTruth:
        p = case.positions.reshape(-1, 3)
        scene = self.truth(seed).with_positions(p[0], p[1:])
        return GroundTruth(scene, self.cfg.noise_db, seed=int(np.random.SeedSequence([seed, idx, stream]).generate_state(1)[0]))


# -- helpers ------------------------------------------------------------------------


def write_csv(path: Path, header: list[str], rows) -> Path:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([f"{v:.6f}" if isinstance(v, float) else v for v in r])
    return Path(path)


def _outdir(out: str | Path | None) -> Path | None:
    if out is None:
        return None
    p = Path(out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _plots():
    from . import plotting
    return plotting


# -- localization ----------------------------------------------------------------------


def rmse_trend_ok(rmse: list[float], slack: float = 0.05, s11_ratio: float = 1.15,
                  s_list=S_SEQUENCE) -> bool:
    """Non-increasing within ``slack`` per step, and RMSE(11) <= ratio * RMSE(63)."""
    steps = all(b <= a * (1.0 + slack) for a, b in zip(rmse[:-1], rmse[1:]))
    s_list = list(s_list)
    if 11 in s_list and 63 in s_list:
        return steps and rmse[s_list.index(11)] <= s11_ratio * rmse[s_list.index(63)]
    return steps


def run_rmse_vs_s(cfg: ExperimentConfig, wb: Workbench | None = None, out=None) -> dict:
    """Test RMSE of the pre-trained localizer per S, averaged over seeds."""
    wb = wb or Workbench(cfg)
    per_seed = np.zeros((len(cfg.s_list), len(cfg.seeds)))
    for j, seed in enumerate(cfg.seeds):
        _, te = wb.source_data(seed)
        for i, s in enumerate(cfg.s_list):
            per_seed[i, j] = evaluate_rmse(wb.pretrained(s, seed), te.subset_beams(s, wb.cb))
    mean = per_seed.mean(axis=1)
    res = {"s": list(cfg.s_list), "rmse_m": mean.tolist(), "per_seed": per_seed.tolist(),
           "trend_ok": rmse_trend_ok(mean.tolist(), s_list=cfg.s_list)}
    d = _outdir(out)
    if d is not None:
        rows = [[s, float(m), *map(float, r)] for s, m, r in zip(cfg.s_list, mean, per_seed)]
        write_csv(d / "rmse_vs_s.csv", ["S", "rmse_m", *[f"rmse_seed{s}" for s in cfg.seeds]], rows)
        _plots().line_plot(d / "rmse_vs_s.svg", {"test": (cfg.s_list, mean)}, "S (measured beams)",
                           "position RMSE (m)", source="rmse_vs_s.csv", logx=True)
    return res


def leave_one_out_table(cfg: ExperimentConfig, s: int, seed: int, wb: Workbench | None = None,
                        out=None) -> list[dict]:
    """Per-location RMSE on the target data before and after leave-one-out fine-tuning."""
    wb = wb or Workbench(cfg)
    ds = wb.target_data(seed).subset_beams(s, wb.cb)
    labels = ds.meta.get("locations") or [str(g) for g in np.unique(ds.groups)]
    rows = []
    for loc in np.unique(ds.groups):
        test = ds.take(np.flatnonzero(ds.groups == loc))
        pre = evaluate_rmse(wb.pretrained(s, seed), test)
        ft = evaluate_rmse(wb.finetuned(s, seed, int(loc)), test)
        rows.append({"location": labels[int(loc)], "rmse_pretrained_m": pre, "rmse_finetuned_m": ft})
    d = _outdir(out)
    if d is not None:
        write_csv(d / f"loo_s{s}_seed{seed}.csv", ["location", "rmse_pretrained_m", "rmse_finetuned_m"],
                  [[r["location"], r["rmse_pretrained_m"], r["rmse_finetuned_m"]] for r in rows])
    return rows


# -- interpolation baseline ----------------------------------------------------------------


def interpolate_grid(cb: Codebook, measured_idx, values) -> tuple[np.ndarray, np.ndarray]:
    """Fill the codebook grid from measured beams by linear interpolation.

    Rows (elevations) with measurements are interpolated along azimuth with
    constant extension past the outermost measured beams; rows without any
    measurement copy the nearest measured row.  Returns the (m, n_az) grid
    and a boolean mask of measured cells.
    """
    az = np.asarray(cb.az_deg, dtype=float)
    grid = np.full((cb.m, cb.n_az), np.nan)
    mask = np.zeros((cb.m, cb.n_az), dtype=bool)
    for i, v in zip(measured_idx, values):
        grid.flat[i] = v
        mask.flat[i] = True
    rows = [r for r in range(cb.m) if mask[r].any()]
    if not rows:
        raise ValueError("no measured beams")
    for r in rows:
        cols = np.flatnonzero(mask[r])
        grid[r] = np.interp(az, az[cols], grid[r, cols])
    el = np.asarray(cb.el_deg, dtype=float)
    for r in range(cb.m):
        if r not in rows:
            near = min(rows, key=lambda q: (abs(el[q] - el[r]), abs(el[q])))
            grid[r] = grid[near]
    return grid, mask


def interpolation_pick(cb: Codebook, measured_idx, values) -> int:
    """Codebook index of the interpolated maximum; ties prefer measured beams, then codebook order."""
    grid, mask = interpolate_grid(cb, measured_idx, values)
    best = np.nanmax(grid)
    cand = np.flatnonzero(np.isclose(grid.ravel(), best, rtol=0, atol=1e-12))
    measured = [i for i in cand if mask.flat[i]]
    return int(measured[0] if measured else cand[0])


def _pao_case(wb: Workbench, s: int, seed: int, idx: int, case: EvalCase, opt: OptimizerConfig):
    """Sweep the S beams once on the ground truth, then run both PAO and the interpolation baseline."""
    gt = wb.ground_truth(seed, idx, case)
    beams = beam_subset(wb.cb, s)
    mv = gt.measure(beams)
    res = pao_loop(mv, wb.case_model(s, seed, case), wb.twin, opt)
    pick = interpolation_pick(wb.cb, beam_subset_indices(wb.cb, s), mv.sinr_db)
    return {
        "pao_true_db": gt.true_sinr_db(res.theta_hat),
        "pao_twin_db": res.sinr_db,
        "baseline_true_db": gt.true_sinr_db(wb.cb.entries[pick]),
        "charges": gt.charges,
        "result": res,
        "mv": mv,
    }


def run_interpolation_benchmark(cfg: ExperimentConfig, wb: Workbench | None = None, out=None,
                                s_list=None) -> dict:
    """PAO versus the linear-interpolation codebook baseline, per S (seed-averaged)."""
    wb = wb or Workbench(cfg)
    s_list = list(s_list or cfg.s_list)
    opt = cfg.optimizer_config()
    pao = np.zeros((len(s_list), len(cfg.seeds)))
    base = np.zeros_like(pao)
    for j, seed in enumerate(cfg.seeds):
        cases = wb.eval_cases(seed)
        for i, s in enumerate(s_list):
            r = [_pao_case(wb, s, seed, k, c, replace(opt, seed=seed * 1000 + k)) for k, c in enumerate(cases)]
            pao[i, j] = np.mean([x["pao_true_db"] for x in r])
            base[i, j] = np.mean([x["baseline_true_db"] for x in r])
    res = {"s": s_list, "pao_db": pao.mean(axis=1).tolist(), "baseline_db": base.mean(axis=1).tolist(),
           "pao_per_seed": pao.tolist(), "baseline_per_seed": base.tolist()}
    d = _outdir(out)
    if d is not None:
        write_csv(d / "interp_benchmark.csv", ["S", "pao_sinr_db", "baseline_sinr_db", "pao_std_db", "baseline_std_db"],
                  [[s, float(p), float(b), float(ps), float(bs)] for s, p, b, ps, bs in
                   zip(s_list, pao.mean(1), base.mean(1), pao.std(1), base.std(1))])
        _plots().line_plot(d / "interp_benchmark.svg",
                           {"PAO": (s_list, pao.mean(1)), "interpolation": (s_list, base.mean(1))},
                           "S (measured beams)", "SINR (dB)", source="interp_benchmark.csv", logx=True)
    return res


# -- budget curves -------------------------------------------------------------------------


class _Recorder:
    """Charged objective on the ground truth that remembers every queried beam."""

    def __init__(self, gt: GroundTruth):
        self.gt = gt
        self.beams: list[Angles] = []
        self.values: list[float] = []

    def __call__(self, theta: Angles) -> float:
        v = self.gt.measure_one(theta)
        self.beams.append(theta)
        self.values.append(v)
        return v

    def true_best_so_far(self) -> np.ndarray:
        """True SINR of the best-measured beam after each evaluation."""
        az = np.array([b.az for b in self.beams])
        el = np.array([b.el for b in self.beams])
        true = np.atleast_1d(self.gt._model.sinr_db(az, el))
        best_idx = np.zeros(len(self.values), dtype=int)
        b = 0
        for i, v in enumerate(self.values):
            if v > self.values[b]:
                b = i
            best_idx[i] = b
        return true[best_idx]


def _pad(curve: np.ndarray, n: int) -> np.ndarray:
    if len(curve) >= n:
        return curve[:n]
    return np.concatenate([curve, np.full(n - len(curve), curve[-1])])


def first_reach(curve: np.ndarray, target: float) -> int | None:
    """1-based evaluation count at which ``curve`` first reaches ``target``."""
    hit = np.flatnonzero(curve >= target)
    return int(hit[0]) + 1 if hit.size else None


def _twin_trace_curve(trace: list[tuple[int, float]], n: int) -> np.ndarray:
    """Step function of a sparse best-so-far trace sampled at evaluations 1..n."""
    out = np.full(n, np.nan)
    for e, v in trace:
        if e <= n:
            out[e - 1:] = v
    first = np.flatnonzero(~np.isnan(out))
    if first.size:
        out[:first[0]] = out[first[0]]
    return out


def run_budget_curves(cfg: ExperimentConfig, wb: Workbench | None = None, out=None) -> dict:
    """Real-measurement cost of PAO versus direct GA/GBO on the ground truth.

    PAO spends ``budget_s`` real measurements per case and optimizes on the
    twin.  The direct baselines charge every objective evaluation to the
    ground truth.  For each method the seed-averaged curve of the true SINR
    of the best-measured beam is compared with PAO's seed-averaged final
    true SINR; the cost ratio is the budget at which the baseline comes
    within 0.5 dB of PAO divided by PAO's cost.
    """
    wb = wb or Workbench(cfg)
    s = cfg.budget_s
    J = cfg.baseline_max_evals
    base_opt = cfg.optimizer_config()
    dms_max = max(cfg.dms_list)
    curves = {"GA": [], "GBO": []}
    pao_final = {"GA": [], "GBO": []}
    gbo_dms_final = {d: [] for d in cfg.dms_list}
    twin_traces = {"GA": [], **{f"GBO-{d}": [] for d in cfg.dms_list}}
    charges_pao = []
    n_twin = 1
    for seed in cfg.seeds:
        for k, case in enumerate(wb.eval_cases(seed)):
            sd = seed * 1000 + k
            model = wb.case_model(s, seed, case)
            gt = wb.ground_truth(seed, k, case)
            mv = gt.measure(beam_subset(wb.cb, s))
            charges_pao.append(gt.charges)
            ga_cfg = replace(base_opt, kind="GA", seed=sd, max_evals=None)
            r_ga = pao_loop(mv, model, wb.twin, ga_cfg)
            pao_final["GA"].append(gt.true_sinr_db(r_ga.theta_hat))
            twin_traces["GA"].append(r_ga.sinr_trace)
            gbo_cfg = replace(base_opt, kind="GBO", seed=sd, starts=dms_max, max_evals=None)
            r_gbo = pao_loop(mv, model, wb.twin, gbo_cfg)
            pao_final["GBO"].append(gt.true_sinr_db(r_gbo.theta_hat))
            for d in cfg.dms_list:
                sub = _gbo_prefix(r_gbo, d)
                gbo_dms_final[d].append(gt.true_sinr_db(sub.theta_hat))
                twin_traces[f"GBO-{d}"].append(sub.sinr_trace)
            n_twin = max(n_twin, r_ga.evaluations, r_gbo.evaluations)
            for kind in ("GA", "GBO"):
                dgt = wb.ground_truth(seed, k, case, stream=1 if kind == "GA" else 2)
                rec = _Recorder(dgt)
                dcfg = replace(base_opt, kind=kind, seed=sd, max_evals=J, patience=None,
                               starts=cfg.baseline_dms)
                (ga_optimize if kind == "GA" else gbo_optimize)(rec, dcfg)
                assert dgt.charges == len(rec.values)
                curves[kind].append(_pad(rec.true_best_so_far(), J))
    res = {"S": s, "pao_cost": float(np.mean(charges_pao)), "methods": {}}
    budget = np.arange(1, J + 1)
    for kind in ("GA", "GBO"):
        avg = np.mean(curves[kind], axis=0)
        target = float(np.mean(pao_final[kind])) - 0.5
        reach = first_reach(avg, target)
        res["methods"][kind] = {
            "pao_final_db": float(np.mean(pao_final[kind])),
            "baseline_final_db": float(avg[-1]),
            "baseline_charges_to_match": reach,
            "ratio": (reach / res["pao_cost"]) if reach is not None else math.inf,
            "ratio_lower_bound": (reach or J) / res["pao_cost"],
            "curve": avg,
        }
    res["gbo_dms_final_db"] = {d: float(np.mean(v)) for d, v in gbo_dms_final.items()}
    d = _outdir(out)
    if d is not None:
        write_csv(d / "budget_direct.csv", ["real_measurements", "direct_ga_sinr_db", "direct_gbo_sinr_db"],
                  [[int(b), float(g), float(h)] for b, g, h in
                   zip(budget, res["methods"]["GA"]["curve"], res["methods"]["GBO"]["curve"])])
        write_csv(d / "budget_summary.csv",
                  ["method", "real_measurements", "final_sinr_db", "baseline_charges_to_match", "ratio"],
                  [[f"PAO-{m}", res["pao_cost"], r["pao_final_db"], r["baseline_charges_to_match"] or "",
                    r["ratio"]] for m, r in res["methods"].items()]
                  + [[f"PAO-GBO-DMS{dd}", res["pao_cost"], v, "", ""] for dd, v in res["gbo_dms_final_db"].items()])
        twin_rows = []
        avg_traces = {}
        for name, traces in twin_traces.items():
            avg_traces[name] = np.mean([_twin_trace_curve(t, n_twin) for t in traces], axis=0)
        for e in range(n_twin):
            twin_rows.append([e + 1, *[float(v[e]) for v in avg_traces.values()]])
        write_csv(d / "budget_twin_traces.csv", ["twin_evaluations", *[f"{n}_twin_sinr_db" for n in avg_traces]],
                  twin_rows)
        p = _plots()
        p.line_plot(d / "budget_direct.svg",
                    {"direct GA": (budget, res["methods"]["GA"]["curve"]),
                     "direct GBO": (budget, res["methods"]["GBO"]["curve"]),
                     "PAO-GA final": ([s, J], [res["methods"]["GA"]["pao_final_db"]] * 2)},
                    "real measurements", "SINR (dB)", source="budget_direct.csv", logx=True, step=True)
        ev = np.arange(1, n_twin + 1)
        p.line_plot(d / "budget_twin_ga.svg", {"PAO-GA": (ev, avg_traces["GA"])},
                    "twin evaluations", "predicted SINR (dB)", source="budget_twin_traces.csv", logx=True, step=True)
        p.line_plot(d / "budget_twin_gbo.svg",
                    {f"D_MS={dd}": (ev, avg_traces[f"GBO-{dd}"]) for dd in cfg.dms_list},
                    "twin evaluations", "predicted SINR (dB)", source="budget_twin_traces.csv", logx=True, step=True)
    return res


def _gbo_prefix(res: PaoResult, d: int) -> PaoResult:
    """Result a GBO run with only the first ``d`` starts would have returned."""
    n = min(d, len(res.completions))
    trace = res.sinr_trace[:n]
    if n == 0:
        raise ValueError("GBO result has no completed starts")
    theta, val = max(res.per_start[:n], key=lambda t: t[1])
    return PaoResult(theta, val, trace, res.completions[n - 1], res.positions_used)


# -- heatmap ---------------------------------------------------------------------------------


def received_power_grid(scene: Scene, positions, cb: Codebook) -> np.ndarray:
    """Received STA power at the AP (dBm) per codebook beam, shape (elevations, azimuths)."""
    model = twin_objective(scene, positions)
    az, el = cb.grid_rad()
    return (10.0 * np.log10(model.signal_power(az, el)) + 30.0).reshape(cb.m, cb.n_az)


def render_heatmap(cfg: ExperimentConfig, wb: Workbench | None = None, out=None, s: int | None = None,
                   seed: int | None = None) -> dict:
    """True versus predicted per-beam received power at one experimental location."""
    wb = wb or Workbench(cfg)
    s = s or cfg.budget_s
    seed = cfg.seeds[0] if seed is None else seed
    _, labels = experimental_layout(wb.twin)
    if cfg.heatmap_location not in labels:
        raise ConfigError(f"unknown location {cfg.heatmap_location!r}")
    loc = labels.index(cfg.heatmap_location)
    ds = wb.target_data(seed).subset_beams(s, wb.cb)
    test = ds.take(np.flatnonzero(ds.groups == loc))
    model = wb.finetuned(s, seed, loc)
    p_true = test.positions[0]
    p_hat = predict(model, test)
    rmse = float(np.sqrt(np.mean(np.sum((p_hat - test.positions) ** 2, axis=1))))
    true_grid = received_power_grid(wb.truth(seed), p_true, wb.cb)
    pred_grid = received_power_grid(wb.twin, p_hat.mean(axis=0), wb.cb)
    r = float(np.corrcoef(true_grid.ravel(), pred_grid.ravel())[0, 1])
    res = {"true_dbm": true_grid, "pred_dbm": pred_grid, "pearson_r": r, "position_rmse_m": rmse,
           "location": cfg.heatmap_location}
    d = _outdir(out)
    if d is not None:
        az, el = wb.cb.az_deg, wb.cb.el_deg
        rows = [[float(e), float(a), float(true_grid[i, j]), float(pred_grid[i, j])]
                for i, e in enumerate(el) for j, a in enumerate(az)]
        write_csv(d / "heatmap.csv", ["el_deg", "az_deg", "true_dbm", "predicted_dbm"], rows)
        _plots().heatmap_plot(d / "heatmap.svg",
                              {f"true positions ({cfg.heatmap_location})": true_grid,
                               f"predicted positions (RMSE={rmse:.2f} m)": pred_grid},
                              az, el, source="heatmap.csv")
    return res


# -- SINR mismatch -------------------------------------------------------------------------------


def binned_means(x: np.ndarray, y: np.ndarray, bins: int) -> tuple[np.ndarray, np.ndarray]:
    """Means of ``x`` and ``y`` over equal-count bins of sorted ``x``."""
    order = np.argsort(x, kind="stable")
    parts = np.array_split(order, bins)
    return np.array([x[p].mean() for p in parts]), np.array([y[p].mean() for p in parts])


def sinr_mismatch(twin: Scene, p_true, p_hat, opt: OptimizerConfig) -> tuple[float, float]:
    """(position RMSE, |SINR(p_hat) - SINR(p_true)|) at the beam chosen for ``p_hat``.

    The position RMSE is taken over the K+1 transmitter points.
    """
    p_true = np.asarray(p_true, dtype=float)
    p_hat = np.asarray(p_hat, dtype=float)
    res = optimize_at(twin, p_hat, opt)
    th = res.theta_hat
    pred = twin_objective(twin, p_hat)(th)
    true = twin_objective(twin, p_true)(th)
    err = float(np.sqrt(np.mean(np.sum((p_hat - p_true).reshape(-1, 3) ** 2, axis=1))))
    return err, abs(pred - true)


def run_sinr_mismatch(cfg: ExperimentConfig, wb: Workbench | None = None, out=None, s_list=None) -> dict:
    """Position RMSE versus SINR mismatch on twin test samples, per S."""
    wb = wb or Workbench(cfg)
    s_list = list(s_list or cfg.s_list)
    seed = cfg.seeds[0]
    _, te = wb.source_data(seed)
    sub = te.take(np.arange(min(cfg.mismatch_samples, len(te))))
    res = {}
    rows = []
    for s in s_list:
        p_hat = predict(wb.pretrained(s, seed), sub.subset_beams(s, wb.cb))
        pts = [sinr_mismatch(wb.twin, p, q, cfg.optimizer_config(seed=seed * 1000 + i))
               for i, (p, q) in enumerate(zip(sub.positions, p_hat))]
        err = np.array([a for a, _ in pts])
        mis = np.array([b for _, b in pts])
        bx, by = binned_means(err, mis, cfg.mismatch_bins)
        res[s] = {"position_rmse_m": err, "sinr_mismatch_db": mis, "bin_x": bx, "bin_y": by,
                  "non_decreasing": bool(np.all(np.diff(by) >= 0))}
        rows += [[s, i, float(a), float(b)] for i, (a, b) in enumerate(zip(err, mis))]
    d = _outdir(out)
    if d is not None:
        write_csv(d / "sinr_mismatch.csv", ["S", "sample", "position_rmse_m", "sinr_mismatch_db"], rows)
        write_csv(d / "sinr_mismatch_bins.csv", ["S", "bin", "position_rmse_m", "sinr_mismatch_db"],
                  [[s, b, float(x), float(y)] for s in s_list
                   for b, (x, y) in enumerate(zip(res[s]["bin_x"], res[s]["bin_y"]))])
        allx = np.concatenate([res[s]["position_rmse_m"] for s in s_list])
        ally = np.concatenate([res[s]["sinr_mismatch_db"] for s in s_list])
        bx, by = binned_means(allx, ally, cfg.mismatch_bins)
        _plots().scatter_plot(d / "sinr_mismatch.svg", allx, ally, "position RMSE (m)", "SINR mismatch (dB)",
                              source="sinr_mismatch.csv", binned=(bx, by))
    return res
