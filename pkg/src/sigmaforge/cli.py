"""Command-line interface.

Subcommands mirror the pipeline stages so each is usable standalone:
synth-gen, ingest, fit, forecast, evaluate, compare, and experiment.  All
numeric output is written with 17 significant digits and every random choice
is derived from an explicit seed, so reruns are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .baselines import fit_garch, fit_har, fit_logsv, garch_filter, har_forecast, logsv_filter
from .baselines.persist import baseline_from_dict, save_baseline
from .cells import SigmaCellConfig, fit as fit_cell, forecast_paths, load_model, save_model
from .cells.persist import MODEL_KIND as CELL_KIND
from .comparison import LossMatrix, dm_test, encompassing_regression, forecast_losses, mcs
from .dataio import fmt, load_daily_csv, load_forecast_csv, load_intraday_csv, save_daily_csv, \
    save_forecast_csv
from .errors import InvalidInputError, SigmaForgeError
from .experiment import CELL_MODELS, GARCH_MODELS, run_experiment
from .metrics import delta_stats, mz_regression, nll_metric, point_metrics
from .series import VolSeries, compute_realized_vol
from .synth import SineVolConfig, gen_sine_vol, sim_garch11


def _cmd_synth_gen(args) -> int:
    if args.kind == "sine":
        vol, rets = gen_sine_vol(SineVolConfig(n=args.n, amplitude=args.amplitude,
                                               half_period=args.half_period, seed=args.seed))
    else:
        vol, rets = sim_garch11(args.omega, args.alpha, args.beta, args.n, seed=args.seed)
    save_daily_csv(args.out, rets, vol)
    print(f"wrote {args.n} rows to {args.out}")
    return 0


def _cmd_ingest(args) -> int:
    bars = load_intraday_csv(args.intraday)
    rv, rets = compute_realized_vol(bars)
    save_daily_csv(args.out, rets, rv)
    print(f"wrote {len(rets)} daily rows to {args.out}")
    return 0


def _cmd_fit(args) -> int:
    returns, rv = load_daily_csv(args.data)
    name = args.model
    if name in CELL_MODELS:
        overrides = {}
        for key in ("hidden", "res_hidden", "epochs", "mc_paths"):
            value = getattr(args, key)
            if value is not None:
                overrides[key] = value
        for key in ("lr", "beta_act", "clip_norm"):
            value = getattr(args, key)
            if value is not None:
                overrides[key] = value
        cfg = SigmaCellConfig(variant=CELL_MODELS[name], seed=args.seed, **overrides)
        model, _ = fit_cell(cfg, returns.values)
        save_model(model, args.out)
    elif name in GARCH_MODELS:
        save_baseline(fit_garch(returns.values, GARCH_MODELS[name]), args.out)
    elif name == "har":
        save_baseline(fit_har(rv.values), args.out)
    elif name == "sv":
        params, _ = fit_logsv(returns.values)
        save_baseline(params, args.out)
    else:
        raise InvalidInputError(f"unknown model {name!r}")
    print(f"fitted {name} on {len(returns)} observations -> {args.out}")
    return 0


def _cmd_forecast(args) -> int:
    returns, rv = load_daily_csv(args.data)
    doc = json.loads(Path(args.model).read_text(encoding="utf-8"))
    if doc.get("model") == CELL_KIND:
        model = load_model(args.model)
        values = forecast_paths(model, returns.values)
        series = VolSeries(returns.index, values)
    else:
        params = baseline_from_dict(doc)
        if doc["model"] == "garch-family":
            series = VolSeries(returns.index, np.sqrt(garch_filter(params, returns.values)))
        elif doc["model"] == "har":
            series = har_forecast(params, rv)
        else:
            series = VolSeries(returns.index, logsv_filter(params, returns.values))
    save_forecast_csv(args.out, series)
    print(f"wrote {len(series)} forecasts to {args.out}")
    return 0


def _load_forecast_set(args) -> tuple[np.ndarray, list[str], list[np.ndarray], np.ndarray]:
    """Align forecast files with the truth file on common date labels."""
    returns, rv = load_daily_csv(args.truth)
    paths = [p for p in args.forecasts.split(",") if p]
    names = args.names.split(",") if args.names else [Path(p).stem for p in paths]
    if len(names) != len(paths):
        raise InvalidInputError("--names must match the number of forecast files")
    forecasts = [load_forecast_csv(p) for p in paths]
    common = set(rv.index)
    for fc in forecasts:
        common &= set(fc.index)
    if not common:
        raise InvalidInputError("no common dates between truth and forecasts")
    labels = [ix for ix in rv.index if ix in common]
    truth_map = dict(zip(rv.index, rv.values))
    ret_map = dict(zip(returns.index, returns.values))
    truth = np.array([truth_map[ix] for ix in labels])
    rets = np.array([ret_map[ix] for ix in labels])
    aligned = []
    for fc in forecasts:
        m = dict(zip(fc.index, fc.values))
        aligned.append(np.array([m[ix] for ix in labels]))
    return truth, names, aligned, rets


def _cmd_evaluate(args) -> int:
    truth, names, forecasts, rets = _load_forecast_set(args)
    header = ["model", "mae", "rmse", "hrmse", "qlike", "nll", "r2",
              "delta_mean", "delta_amplitude"]
    lines = [",".join(header)]
    for name, fc in zip(names, forecasts):
        pm = point_metrics(truth, fc)
        ds = delta_stats(truth, fc)
        try:
            r2 = mz_regression(truth, fc)["r2"]
        except SigmaForgeError:
            r2 = None
        row = [name, pm["mae"], pm["rmse"], pm["hrmse"], pm["qlike"],
               nll_metric(rets, fc), r2, ds["delta_mean"], ds["delta_amplitude"]]
        lines.append(",".join("" if v is None else (fmt(v) if isinstance(v, float) else str(v))
                              for v in row))
    text = "\n".join(lines) + "\n"
    Path(args.out).write_text(text, encoding="utf-8")
    print(f"wrote metrics for {len(names)} models to {args.out}")
    return 0


def _cmd_compare(args) -> int:
    truth, names, forecasts, _ = _load_forecast_set(args)
    losses = [loss.strip().lower() for loss in args.losses.split(",")]
    lines = []
    if args.test == "dm":
        if args.base not in names:
            raise InvalidInputError(f"--base {args.base!r} not among forecast names")
        base_fc = forecasts[names.index(args.base)]
        header = ["model"]
        for loss in losses:
            header += [f"{loss}_loss", f"{loss}_p"]
        lines.append(",".join(header))
        for name, fc in zip(names, forecasts):
            row = [name]
            for loss in losses:
                la = forecast_losses(truth, fc, loss)
                row.append(fmt(float(np.mean(la))))
                if name == args.base:
                    row.append("")
                else:
                    lb = forecast_losses(truth, base_fc, loss)
                    row.append(fmt(dm_test(la, lb)["p_value"]))
            lines.append(",".join(row))
    elif args.test == "mcs":
        matrix = np.vstack([forecast_losses(truth, fc, losses[0]) for fc in forecasts])
        result = mcs(LossMatrix(tuple(names), matrix), n_boot=args.bootstrap,
                     block_len=args.block_len, seed=args.seed)
        lines.append("model,mean_loss,p_value,membership")
        for name, fc in zip(names, forecasts):
            p = result.p_values[name]
            stars = "**" if p >= 0.25 else ("*" if p >= 0.10 else "")
            lines.append(f"{name},{fmt(float(np.mean(forecast_losses(truth, fc, losses[0]))))},"
                         f"{fmt(p)},{stars}")
    else:  # encompass
        lines.append("model_i,model_j,alpha1,p1,stars1,alpha2,p2,stars2")
        for i, ni in enumerate(names):
            for j, nj in enumerate(names):
                if i == j:
                    continue
                out = encompassing_regression(truth, forecasts[i], forecasts[j])
                lines.append(f"{ni},{nj},{fmt(out['alpha1'])},{fmt(out['p1'])},{out['stars1']},"
                             f"{fmt(out['alpha2'])},{fmt(out['p2'])},{out['stars2']}")
    Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {args.test} comparison to {args.out}")
    return 0


def _cmd_experiment(args) -> int:
    config = json.loads(Path(args.config).read_text(encoding="utf-8"))
    out_dir = args.out or config.get("output_dir")
    if not out_dir:
        raise InvalidInputError("no output directory: pass --out or set output_dir in the config")
    report = run_experiment(config, out_dir)
    print(f"experiment complete: {len(report.models)} models, outputs in {out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sigmaforge",
                                     description="Volatility modeling and forecast evaluation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-gen", help="generate synthetic daily data")
    p.add_argument("--kind", choices=["sine", "garch"], default="sine")
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--amplitude", type=float, default=0.7)
    p.add_argument("--half-period", dest="half_period", type=float, default=50.0)
    p.add_argument("--omega", type=float, default=0.1)
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--beta", type=float, default=0.8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synth_gen)

    p = sub.add_parser("ingest", help="build daily return/RV data from intraday prices")
    p.add_argument("--intraday", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("fit", help="fit one model to a daily CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--hidden", type=int)
    p.add_argument("--res-hidden", dest="res_hidden", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--beta-act", dest="beta_act", type=float)
    p.add_argument("--clip-norm", dest="clip_norm", type=float)
    p.add_argument("--mc-paths", dest="mc_paths", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("forecast", help="volatility forecasts from a fitted model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_forecast)

    p = sub.add_parser("evaluate", help="metric table for forecast files vs a truth file")
    p.add_argument("--truth", required=True)
    p.add_argument("--forecasts", required=True, help="comma-separated forecast CSVs")
    p.add_argument("--names", help="comma-separated model names (default: file stems)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("compare", help="statistical forecast comparison")
    p.add_argument("--test", choices=["dm", "mcs", "encompass"], required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--forecasts", required=True)
    p.add_argument("--names")
    p.add_argument("--base", help="base model name for the dm test")
    p.add_argument("--losses", default="mse,mad")
    p.add_argument("--bootstrap", type=int, default=10_000)
    p.add_argument("--block-len", dest="block_len", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("experiment", help="run a full experiment from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_experiment)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SigmaForgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
