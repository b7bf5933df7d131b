"""End-to-end experiment orchestration.

A JSON config describes the data source (synthetic generator or CSV), the
train/valid/test split, the model list, and the requested comparison tests.
``run_experiment`` then generates or loads data, fits every model on the
training segment, produces one-step-ahead volatility forecasts over the whole
sample by filtering at the fitted parameters, evaluates the validation
("in-sample"; the training segment when no validation split is configured)
and test ("out-of-sample") segments, runs the requested statistical tests on
the test segment, and writes CSV tables, fitted models, forecasts, a JSON
summary, and a manifest with the config hash.  Everything is a deterministic
function of the config and master seed; reruns produce byte-identical output.
"""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import (
    fit_garch,
    fit_har,
    fit_logsv,
    garch_filter,
    har_forecast,
    logsv_filter,
)
from .baselines.persist import baseline_to_dict
from .cells import SigmaCellConfig, fit as fit_cell, forecast_paths, model_to_dict
from .comparison import (
    LossMatrix,
    STAR_LEVELS,
    dm_test,
    encompassing_regression,
    forecast_losses,
    mcs,
)
from .dataio import fmt, load_daily_csv, load_intraday_csv, save_forecast_csv
from .errors import ConfigError, SingularDesignError, StageError
from .metrics import MetricRow, delta_stats, mz_regression, nll_metric, point_metrics
from .series import DatasetSplit, ReturnSeries, VolSeries, compute_realized_vol, split_series
from .synth import SineVolConfig, gen_sine_vol, sim_garch11

__all__ = ["ExperimentReport", "FittedModel", "run_experiment", "emit_table", "worker_count"]

THREADS_ENV = "SIGMA_FORGE_THREADS"

CELL_MODELS = {
    "sigma-cell": "base",
    "sigma-cell-n": "n",
    "sigma-cell-ntv": "ntv",
    "sigma-cell-rl": "rl",
    "sigma-cell-rltv": "rltv",
}
GARCH_MODELS = {"garch11": "garch", "egarch": "egarch", "tarch": "tarch", "gjr-garch": "gjr"}
KNOWN_MODELS = tuple(CELL_MODELS) + tuple(GARCH_MODELS) + ("har", "sv")

_CELL_OVERRIDES = ("hidden", "res_hidden", "beta_act", "lr", "epochs", "clip_norm",
                   "variance_floor", "mc_paths", "restarts", "init_candidates")


def worker_count() -> int:
    """Worker cap from SIGMA_FORGE_THREADS, defaulting to available parallelism."""
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be >= 1")
    return n


@dataclass
class FittedModel:
    name: str
    payload: object
    forecast: np.ndarray  # full-length sigma_hat, NaN where undefined
    document: dict


@dataclass
class ExperimentReport:
    config: dict
    config_hash: str
    data_kind: str
    returns: ReturnSeries
    truth: VolSeries
    split: DatasetSplit
    insample: range
    models: list = field(default_factory=list)
    metrics: dict = field(default_factory=dict)  # segment -> [MetricRow]
    dm: dict = field(default_factory=dict)  # base name -> rows
    mcs_result: object = None
    encompassing: dict | None = None


def config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _require(condition, message, fieldpath):
    if not condition:
        raise ConfigError(message, field=fieldpath)


def validate_config(config: dict) -> dict:
    """Schema check with dotted field paths in error messages."""
    _require(isinstance(config, dict), "config must be an object", "")
    data = config.get("data")
    _require(isinstance(data, dict), "missing data section", "data")
    kind = data.get("kind")
    _require(kind in ("sine", "garch", "daily_csv", "intraday_csv"),
             f"unknown data kind {kind!r}", "data.kind")
    if kind in ("daily_csv", "intraday_csv"):
        path = data.get("path")
        _require(isinstance(path, str) and path, "missing file path", "data.path")
        _require(Path(path).exists(), f"no such file: {path}", "data.path")
    if kind == "sine":
        _require(int(data.get("n", 2000)) >= 2, "n must be >= 2", "data.n")
    if kind == "garch":
        for key in ("omega", "alpha", "beta"):
            _require(key in data, f"garch generator needs {key}", f"data.{key}")

    split = config.get("split", {})
    _require(isinstance(split, dict), "split must be an object", "split")
    for key in ("valid", "test"):
        if key in split:
            _require(isinstance(split[key], int) and split[key] >= 0,
                     f"{key} length must be a nonnegative integer", f"split.{key}")

    models = config.get("models")
    _require(isinstance(models, list) and models, "need at least one model", "models")
    seen = set()
    for i, entry in enumerate(models):
        _require(isinstance(entry, dict), "model entry must be an object", f"models[{i}]")
        name = entry.get("name")
        _require(name in KNOWN_MODELS, f"unknown model {name!r} (choose from {KNOWN_MODELS})",
                 f"models[{i}].name")
        _require(name not in seen, f"duplicate model {name!r}", f"models[{i}].name")
        seen.add(name)

    tests = config.get("tests", {})
    _require(isinstance(tests, dict), "tests must be an object", "tests")
    if "dm" in tests:
        dm_cfg = tests["dm"]
        _require(isinstance(dm_cfg, dict), "dm must be an object", "tests.dm")
        base = dm_cfg.get("base")
        _require(base in seen, f"dm base {base!r} is not in the model list", "tests.dm.base")
    _require(isinstance(config.get("seed", 0), int), "seed must be an integer", "seed")
    return config


def _load_data(data_cfg: dict, master_seed: int) -> tuple[str, ReturnSeries, VolSeries]:
    kind = data_cfg["kind"]
    if kind == "sine":
        cfg = SineVolConfig(
            n=int(data_cfg.get("n", 2000)),
            amplitude=float(data_cfg.get("amplitude", 0.7)),
            half_period=float(data_cfg.get("half_period", 50.0)),
            seed=int(data_cfg.get("seed", master_seed)),
        )
        truth, returns = gen_sine_vol(cfg)
        return "synthetic", returns, truth
    if kind == "garch":
        truth, returns = sim_garch11(
            float(data_cfg["omega"]), float(data_cfg["alpha"]), float(data_cfg["beta"]),
            int(data_cfg.get("n", 2000)), seed=int(data_cfg.get("seed", master_seed)),
        )
        return "synthetic", returns, truth
    if kind == "daily_csv":
        returns, rv = load_daily_csv(data_cfg["path"])
        return "real", returns, rv
    bars = load_intraday_csv(data_cfg["path"])
    rv, returns = compute_realized_vol(bars)
    return "real", returns, rv


def _derived_seed(master_seed: int, index: int) -> int:
    return int(np.random.SeedSequence((master_seed, index)).generate_state(1)[0])


def _fit_one(entry: dict, returns: ReturnSeries, truth: VolSeries, split: DatasetSplit,
             master_seed: int, index: int) -> FittedModel:
    name = entry["name"]
    train_r = returns.values[split.train.start : split.train.stop]
    full_r = returns.values
    T = full_r.size

    if name in CELL_MODELS:
        overrides = {k: entry[k] for k in _CELL_OVERRIDES if k in entry}
        cfg = SigmaCellConfig(
            variant=CELL_MODELS[name],
            seed=int(entry.get("seed", _derived_seed(master_seed, index))),
            **overrides,
        )
        valid_r = returns.values[split.valid.start : split.valid.stop]
        model, _ = fit_cell(cfg, train_r, valid_r if valid_r.size else None)
        fc = forecast_paths(model, full_r)
        return FittedModel(name, model, fc, model_to_dict(model))

    if name in GARCH_MODELS:
        params = fit_garch(train_r, GARCH_MODELS[name])
        fc = np.sqrt(garch_filter(params, full_r))
        return FittedModel(name, params, fc, baseline_to_dict(params))

    if name == "har":
        train_rv = truth.values[split.train.start : split.train.stop]
        params = fit_har(train_rv)
        fc_series = har_forecast(params, truth)
        fc = np.full(T, np.nan)
        fc[T - len(fc_series.values):] = fc_series.values
        return FittedModel(name, params, fc, baseline_to_dict(params))

    # sv
    params, _ = fit_logsv(train_r)
    fc = logsv_filter(params, full_r)
    return FittedModel(name, params, fc, baseline_to_dict(params))


def _segment_rows(models: list, returns: ReturnSeries, truth: VolSeries, seg: range) -> list:
    rows = []
    r_seg = returns.values[seg.start : seg.stop]
    t_seg = truth.values[seg.start : seg.stop]
    for fm in models:
        f_seg = fm.forecast[seg.start : seg.stop]
        if np.any(np.isnan(f_seg)):
            rows.append(MetricRow(model=fm.name))
            continue
        pm = point_metrics(t_seg, f_seg)
        try:
            r2 = mz_regression(t_seg, f_seg)["r2"]
        except SingularDesignError:
            r2 = None
        ds = delta_stats(t_seg, f_seg)
        rows.append(MetricRow(
            model=fm.name,
            mae=pm["mae"], rmse=pm["rmse"], hrmse=pm["hrmse"], qlike=pm["qlike"],
            nll=nll_metric(r_seg, f_seg), r2=r2,
            delta_mean=ds["delta_mean"], delta_amplitude=ds["delta_amplitude"],
        ))
    return rows


def _run_tests(report: ExperimentReport, tests_cfg: dict, master_seed: int) -> None:
    seg = report.split.test
    truth_seg = report.truth.values[seg.start : seg.stop]
    usable = [fm for fm in report.models
              if not np.any(np.isnan(fm.forecast[seg.start : seg.stop]))]
    seg_fc = {fm.name: fm.forecast[seg.start : seg.stop] for fm in usable}

    if "dm" in tests_cfg:
        base = tests_cfg["dm"]["base"]
        losses = [loss.lower() for loss in tests_cfg["dm"].get("losses", ["mse", "mad"])]
        rows = []
        for fm in usable:
            row = {"model": fm.name}
            for loss in losses:
                la = forecast_losses(truth_seg, seg_fc[fm.name], loss)
                row[f"{loss}_loss"] = float(np.mean(la))
                if fm.name == base:
                    row[f"{loss}_p"] = None
                else:
                    lb = forecast_losses(truth_seg, seg_fc[base], loss)
                    row[f"{loss}_p"] = dm_test(la, lb)["p_value"]
            rows.append(row)
        report.dm[base] = rows

    if "mcs" in tests_cfg and len(usable) >= 2:
        mcs_cfg = tests_cfg["mcs"] if isinstance(tests_cfg["mcs"], dict) else {}
        losses = np.vstack([forecast_losses(truth_seg, seg_fc[fm.name], "mse") for fm in usable])
        report.mcs_result = mcs(
            LossMatrix(tuple(fm.name for fm in usable), losses),
            n_boot=int(mcs_cfg.get("bootstrap", 10_000)),
            block_len=mcs_cfg.get("block_len"),
            seed=int(mcs_cfg.get("seed", master_seed)),
        )

    if tests_cfg.get("encompassing") and len(usable) >= 2:
        names = [fm.name for fm in usable]
        grid_a1 = {n: {} for n in names}
        grid_a2 = {n: {} for n in names}
        for ni in names:
            for nj in names:
                if ni == nj:
                    continue
                try:
                    out = encompassing_regression(truth_seg, seg_fc[ni], seg_fc[nj])
                except SingularDesignError:
                    grid_a1[ni][nj] = grid_a2[ni][nj] = None
                    continue
                grid_a1[ni][nj] = (out["alpha1"], out["stars1"])
                grid_a2[ni][nj] = (out["alpha2"], out["stars2"])
        report.encompassing = {"a1": grid_a1, "a2": grid_a2, "names": names}


def _csv(rows: list[list], header: list[str]) -> str:
    def cell(v):
        if v is None:
            return ""
        if isinstance(v, float):
            return fmt(v)
        return str(v)

    lines = [",".join(header)]
    lines.extend(",".join(cell(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def _metric_cell(row: MetricRow, column: str, scale: float = 1.0):
    value = getattr(row, column)
    return None if value is None else value * scale


def emit_table(report: ExperimentReport, table_id: str) -> str:
    """Render one report table as CSV text (deterministic, 17 significant digits)."""
    tables = available_tables(report)
    if table_id not in tables:
        raise ConfigError(f"unknown table {table_id!r}; available: {', '.join(sorted(tables))}")

    if table_id in ("metrics-insample", "metrics-oos"):
        seg = "insample" if table_id.endswith("insample") else "oos"
        header = ["model", "mae", "rmse", "hrmse", "qlike", "nll", "r2",
                  "delta_mean", "delta_amplitude"]
        rows = [[r.model] + [_metric_cell(r, c) for c in header[1:]]
                for r in report.metrics[seg]]
        return _csv(rows, header)

    if table_id in ("synth-insample", "synth-oos"):
        seg = "insample" if table_id.endswith("insample") else "oos"
        rows = [[r.model, r.rmse, r.mae, r.nll, r.delta_mean, r.delta_amplitude]
                for r in report.metrics[seg]]
        return _csv(rows, ["model", "rmse", "mae", "nll", "delta_mean", "delta_amplitude"])

    if table_id in ("real-insample", "real-oos"):
        seg = "insample" if table_id.endswith("insample") else "oos"
        rows = [[r.model, _metric_cell(r, "mae", 1e3), _metric_cell(r, "rmse", 1e3),
                 r.hrmse, r.qlike, r.r2] for r in report.metrics[seg]]
        return _csv(rows, ["model", "mae_x1e3", "rmse_x1e3", "hrmse", "qlike", "r2"])

    if table_id.startswith("dm-"):
        base = table_id[3:]
        rows_in = report.dm[base]
        loss_keys = [k[:-5] for k in rows_in[0] if k.endswith("_loss")]
        header = ["model"]
        for loss in loss_keys:
            header += [f"{loss}_loss_x1e3", f"{loss}_p"]
        rows = []
        for r in rows_in:
            row = [r["model"]]
            for loss in loss_keys:
                row += [r[f"{loss}_loss"] * 1e3, r[f"{loss}_p"]]
            rows.append(row)
        return _csv(rows, header)

    if table_id == "mcs":
        res = report.mcs_result
        seg = report.split.test
        truth_seg = report.truth.values[seg.start : seg.stop]
        rows = []
        for fm in report.models:
            if fm.name not in res.p_values:
                continue
            p = res.p_values[fm.name]
            membership = "**" if p >= 0.25 else ("*" if p >= 0.10 else "")
            mse = float(np.mean(forecast_losses(
                truth_seg, fm.forecast[seg.start : seg.stop], "mse")))
            rows.append([fm.name, mse * 1e3, p, membership])
        return _csv(rows, ["model", "mse_x1e3", "p_value", "membership"])

    # encompassing grids
    which = table_id.rsplit("-", 1)[1]
    grid = report.encompassing[which]
    names = report.encompassing["names"]
    rows = []
    for ni in names:
        row = [ni]
        for nj in names:
            if ni == nj:
                row.append("-")
                continue
            cell = grid[ni][nj]
            row.append("" if cell is None else f"{fmt(cell[0])}{cell[1]}")
        rows.append(row)
    return _csv(rows, ["model"] + list(names))


def available_tables(report: ExperimentReport) -> tuple:
    ids = ["metrics-insample", "metrics-oos"]
    if report.data_kind == "synthetic":
        ids += ["synth-insample", "synth-oos"]
    else:
        ids += ["real-insample", "real-oos"]
    ids += [f"dm-{base}" for base in report.dm]
    if report.mcs_result is not None:
        ids.append("mcs")
    if report.encompassing is not None:
        ids += ["encompassing-a1", "encompassing-a2"]
    return tuple(ids)


def _summary_payload(report: ExperimentReport) -> dict:
    def rows_payload(rows):
        return [{
            "model": r.model, "mae": r.mae, "rmse": r.rmse, "hrmse": r.hrmse,
            "qlike": r.qlike, "nll": r.nll, "r2": r.r2,
            "delta_mean": r.delta_mean, "delta_amplitude": r.delta_amplitude,
        } for r in rows]

    payload = {
        "version": __version__,
        "config_hash": report.config_hash,
        "data_kind": report.data_kind,
        "n_observations": len(report.returns),
        "split": {
            "train": [report.split.train.start, report.split.train.stop],
            "valid": [report.split.valid.start, report.split.valid.stop],
            "test": [report.split.test.start, report.split.test.stop],
        },
        "metrics": {seg: rows_payload(rows) for seg, rows in report.metrics.items()},
        "dm": report.dm,
        "star_convention": {stars: f"p <= {fmt(level)}" for level, stars in STAR_LEVELS},
    }
    if report.mcs_result is not None:
        payload["mcs"] = {
            "p_values": report.mcs_result.p_values,
            "eliminated_order": list(report.mcs_result.eliminated_order),
            "members_90": list(report.mcs_result.members(0.90)),
            "members_75": list(report.mcs_result.members(0.75)),
        }
    return payload


def run_experiment(config: dict | str | Path, out_dir: str | Path) -> ExperimentReport:
    """Execute the full pipeline; writes outputs under ``out_dir``.

    Any stage failure raises StageError after recording the failed stage in
    the manifest; outputs produced by earlier stages are preserved.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stages_done: list[str] = []
    manifest_path = out / "manifest.json"

    def write_manifest(status: str, extra: dict | None = None) -> None:
        doc = {
            "version": __version__,
            "status": status,
            "stages_completed": list(stages_done),
        }
        if extra:
            doc.update(extra)
        manifest_path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n",
                                 encoding="utf-8")

    def stage(name):
        class _Stage:
            def __enter__(self):
                return None

            def __exit__(self, exc_type, exc, tb):
                if exc is None:
                    stages_done.append(name)
                    return False
                write_manifest(f"failed:{name}", {"error": str(exc)})
                raise StageError(name, exc) from exc

        return _Stage()

    with stage("config"):
        if not isinstance(config, dict):
            config = json.loads(Path(config).read_text(encoding="utf-8"))
        config = validate_config(config)
        chash = config_hash(config)
        master_seed = int(config.get("seed", 0))

    with stage("data"):
        data_kind, returns, truth = _load_data(config["data"], master_seed)

    with stage("split"):
        split_cfg = config.get("split", {})
        split = split_series(returns, int(split_cfg.get("valid", 252)),
                             int(split_cfg.get("test", 252)))
        insample = split.valid if len(split.valid) > 0 else split.train
        report = ExperimentReport(config, chash, data_kind, returns, truth, split, insample)

    with stage("fit"):
        entries = config["models"]
        with ThreadPoolExecutor(max_workers=min(worker_count(), len(entries))) as pool:
            futures = [
                pool.submit(_fit_one, entry, returns, truth, split, master_seed, i)
                for i, entry in enumerate(entries)
            ]
            report.models = [f.result() for f in futures]
        models_dir = out / "models"
        models_dir.mkdir(exist_ok=True)
        for fm in report.models:
            (models_dir / f"{fm.name}.json").write_text(
                json.dumps(fm.document, indent=2) + "\n", encoding="utf-8")

    with stage("forecast"):
        fc_dir = out / "forecasts"
        fc_dir.mkdir(exist_ok=True)
        for fm in report.models:
            defined = ~np.isnan(fm.forecast)
            series = VolSeries(tuple(np.asarray(returns.index, dtype=object)[defined]),
                               fm.forecast[defined])
            save_forecast_csv(fc_dir / f"{fm.name}.csv", series)

    with stage("evaluate"):
        report.metrics["insample"] = _segment_rows(report.models, returns, truth, insample)
        report.metrics["oos"] = _segment_rows(report.models, returns, truth, split.test)

    with stage("tests"):
        _run_tests(report, config.get("tests", {}), master_seed)

    with stage("emit"):
        for table_id in available_tables(report):
            (out / f"{table_id.replace('-', '_')}.csv").write_text(
                emit_table(report, table_id), encoding="utf-8")
        (out / "summary.json").write_text(
            json.dumps(_summary_payload(report), indent=2, sort_keys=True) + "\n",
            encoding="utf-8")

    write_manifest("ok", {"config_hash": chash, "seed": master_seed})
    return report
