"""Batch command-line front end.

Subcommands cover the full pipeline: network construction and summaries,
panel preparation, model fitting, order selection, forecasting with held-out
evaluation, seeded simulation (optionally refitting and tabulating truth
versus estimates), residual diagnostics, and the per-node AR baseline.

Every output file embeds tool version, the command line, and the seed, and
files are written atomically (temp + rename); reruns with identical inputs
produce byte-identical outputs.  Option precedence is flags > config file >
built-in defaults; the config is a flat JSON object keyed by option name
(dashes or underscores) and may supply any option of the invoked
subcommand, including ones that are otherwise mandatory.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .errors import GnarError, InvalidInputError
from . import geo_graph as gg
from . import panel as pn
from . import gnar_core as gc
from . import selection as sel
from . import diagnostics as dg


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------

def _meta(args: argparse.Namespace) -> dict:
    return {
        "tool": f"gnarlib {__version__}",
        "command": " ".join(args.argv),
        "seed": getattr(args, "seed", 0),
    }


def _meta_lines(args: argparse.Namespace) -> list[str]:
    m = _meta(args)
    return [f"tool={m['tool']}", f"command={m['command']}", f"seed={m['seed']}"]


def _atomic_write_text(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_json(path: str, obj: dict, args: argparse.Namespace) -> None:
    obj = dict(obj)
    obj["meta"] = _meta(args)
    _atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_csv(path: str, header: Sequence[str], rows, args: argparse.Namespace) -> None:
    lines = [f"# {line}" for line in _meta_lines(args)]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_cell(v) for v in row))
    _atomic_write_text(path, "\n".join(lines) + "\n")


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)


def _write_panel(path: str, panel: pn.TimeSeriesPanel, args: argparse.Namespace) -> None:
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    os.close(fd)
    try:
        pn.write_wide_csv(panel, tmp, meta_lines=_meta_lines(args))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _out_path(args: argparse.Namespace, name: str) -> str:
    out_dir = getattr(args, "out_dir", None) or "."
    return os.path.join(out_dir, name)


def _require(args: argparse.Namespace, *names: str) -> None:
    missing = [n for n in names if getattr(args, n.replace("-", "_"), None) is None]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise InvalidInputError(f"missing required option(s): {flags} "
                                "(set on the command line or in --config)")


# ---------------------------------------------------------------------------
# Input helpers
# ---------------------------------------------------------------------------

def _load_scheme(args: argparse.Namespace, g: gg.Graph) -> gc.WeightScheme:
    kind = args.scheme
    if kind in ("spl", "uniform"):
        return gc.WeightScheme(kind)
    if not getattr(args, "points", None):
        raise InvalidInputError(f"scheme {kind!r} needs --points for distances")
    points = gg.read_points_csv(args.points)
    by_id = {p.node_id: p for p in points}
    missing = [lbl for lbl in g.labels if lbl not in by_id]
    if missing:
        raise InvalidInputError(f"points file lacks coordinates for {missing}")
    ordered = [by_id[lbl] for lbl in g.labels]
    dist = gg.distance_matrix(ordered)
    if kind == "idw":
        return gc.WeightScheme("idw", dist_km=dist)
    pops = [p.population for p in ordered]
    if any(v is None for v in pops):
        raise InvalidInputError("scheme 'pb' needs a population column in --points")
    return gc.WeightScheme("pb", dist_km=dist, populations=np.asarray(pops, dtype=float))


def _parse_s(text) -> tuple[int, ...]:
    if isinstance(text, (list, tuple)):
        return tuple(int(v) for v in text)
    return tuple(int(v) for v in str(text).split(",")) if str(text) else ()


def _parse_alpha(value) -> np.ndarray:
    if isinstance(value, (list, tuple)):
        return np.asarray([float(v) for v in value])
    return np.asarray([float(v) for v in str(value).split(",")])


def _parse_beta(value, s: tuple[int, ...]) -> list[np.ndarray]:
    if isinstance(value, (list, tuple)):
        groups = [[float(v) for v in grp] for grp in value]
    else:
        groups = [[float(v) for v in grp.split(",") if v.strip() != ""]
                  for grp in str(value).split(";")]
    if len(groups) != len(s):
        raise InvalidInputError(
            f"beta has {len(groups)} lag groups but s has {len(s)} entries")
    for grp, sj in zip(groups, s):
        if len(grp) != sj:
            raise InvalidInputError(
                f"beta group {grp} has {len(grp)} entries, expected {sj}")
    return [np.asarray(grp) for grp in groups]


def _spec_from_args(args: argparse.Namespace, g: gg.Graph) -> gc.GnarSpec:
    order = gc.GnarOrder(p=args.p, s=_parse_s(args.s))
    return gc.GnarSpec(order=order, global_alpha=not args.vertex_alpha,
                       scheme=_load_scheme(args, g))


def _aligned_panel(args: argparse.Namespace, g: gg.Graph) -> pn.TimeSeriesPanel:
    panel = pn.read_wide_csv(args.panel)
    if tuple(panel.labels) == tuple(g.labels):
        return panel
    if set(panel.labels) != set(g.labels):
        raise InvalidInputError("panel and graph node sets differ; cannot align them")
    order = [panel.labels.index(lbl) for lbl in g.labels]
    return pn.TimeSeriesPanel(labels=g.labels, dates=panel.dates,
                              values=panel.values[order])


# ---------------------------------------------------------------------------
# network
# ---------------------------------------------------------------------------

def cmd_network_build(args: argparse.Namespace) -> int:
    _require(args, "kind", "out")
    kind = args.kind
    if kind == "complete":
        if args.points:
            labels = [p.node_id for p in gg.read_points_csv(args.points)]
        elif args.n:
            width = len(str(args.n))
            labels = [f"v{i + 1:0{width}d}" for i in range(args.n)]
        else:
            raise InvalidInputError("complete graph needs --points or --n")
        g = gg.build_complete(labels)
    elif kind == "edgelist":
        _require(args, "edges")
        edges = gg.read_edgelist_csv(args.edges)
        if args.points:
            labels = [p.node_id for p in gg.read_points_csv(args.points)]
        else:
            labels = sorted({v for e in edges for v in e})
        g = gg.build_from_edgelist(labels, edges)
    elif kind == "hub":
        _require(args, "points", "edges", "hubs")
        points = gg.read_points_csv(args.points)
        edges = gg.read_edgelist_csv(args.edges)
        base = gg.build_from_edgelist([p.node_id for p in points], edges)
        hubs = [h.strip() for h in args.hubs.split(",") if h.strip()]
        g = gg.build_economic_hub(base, points, hubs)
    else:
        _require(args, "points")
        points = gg.read_points_csv(args.points)
        if kind == "knn":
            _require(args, "k")
            g = gg.build_knn(points, args.k)
        elif kind == "dnn":
            _require(args, "d_max")
            g = gg.build_dnn(points, args.d_max)
        elif kind == "delaunay":
            g = gg.build_delaunay(points)
        elif kind == "gabriel":
            g = gg.derive_gabriel(points)
        elif kind == "soi":
            g = gg.derive_soi(points)
        elif kind == "relative":
            g = gg.derive_relative(points)
        else:
            raise InvalidInputError(f"unknown network kind {args.kind!r}")
    _write_json(args.out, g.to_json(), args)
    print(f"wrote {args.out} ({g.n} nodes, {g.n_edges} edges)")
    return 0


def cmd_network_summarize(args: argparse.Namespace) -> int:
    _require(args, "graph", "out")
    g = gg.read_graph_json(args.graph)
    s = gg.network_summary(g, brg_samples=args.brg_samples, seed=args.seed)
    header = ["n", "n_edges", "avg_degree", "avg_spl", "avg_local_clustering",
              "disconnected_pair_fraction", "brg_avg_spl", "brg_avg_clustering",
              "brg_disconnected_pair_fraction", "brg_samples", "seed"]
    row = [g.n, g.n_edges, s.avg_degree, s.avg_spl, s.avg_local_clustering,
           s.disconnected_pair_fraction, s.brg_avg_spl, s.brg_avg_clustering,
           s.brg_disconnected_pair_fraction, s.brg_samples, s.seed]
    _write_csv(args.out, header, [row], args)
    print(f"wrote {args.out}")
    return 0


# ---------------------------------------------------------------------------
# data
# ---------------------------------------------------------------------------

def cmd_data(args: argparse.Namespace) -> int:
    import datetime

    sub = args.data_cmd
    _require(args, "out")
    if sub == "ingest":
        _require(args, "csv")
        panel = pn.ingest_long_csv(args.csv)
        _write_panel(args.out, panel, args)
    elif sub == "weekly":
        _require(args, "panel")
        panel = pn.weekly_from_cumulative(pn.read_wide_csv(args.panel),
                                          tolerance=args.tolerance)
        _write_panel(args.out, panel, args)
    elif sub == "smooth":
        _require(args, "panel", "window", "start", "end")
        interval = (datetime.date.fromisoformat(args.start),
                    datetime.date.fromisoformat(args.end))
        panel = pn.rolling_average(pn.read_wide_csv(args.panel), args.window, interval)
        _write_panel(args.out, panel, args)
    elif sub == "diff":
        _require(args, "panel")
        panel = pn.difference(pn.read_wide_csv(args.panel), args.lag)
        _write_panel(args.out, panel, args)
    elif sub == "phases":
        _require(args, "panel", "spec")
        spec = pn.read_phase_spec_json(args.spec)
        panel = pn.split_phases(pn.read_wide_csv(args.panel), spec)
        _write_panel(args.out, panel, args)
    elif sub == "boxcox":
        _require(args, "panel")
        panel = pn.read_wide_csv(args.panel)
        series = panel.row(args.node) if args.node else panel.values.ravel()
        grid = np.linspace(args.grid_min, args.grid_max, args.grid_steps)
        prof = pn.boxcox_profile(series[~np.isnan(series)], grid)
        rows = [[lmb, ll] for lmb, ll in zip(prof.lambda_grid, prof.loglik)]
        _write_csv(args.out, ["lambda", "loglik"], rows, args)
        print(f"lambda_hat={prof.lambda_hat:g} shift={prof.shift:g}")
    else:
        raise InvalidInputError(f"unknown data subcommand {sub!r}")
    print(f"wrote {args.out}")
    return 0


# ---------------------------------------------------------------------------
# fit / select / forecast
# ---------------------------------------------------------------------------

def cmd_fit(args: argparse.Namespace) -> int:
    _require(args, "panel", "graph", "p", "s", "out")
    g = gg.read_graph_json(args.graph)
    panel = _aligned_panel(args, g)
    spec = _spec_from_args(args, g)
    fit = gc.fit(panel, g, spec, method=args.method)
    margin = gc.stationarity_margin(fit.alpha, fit.beta)
    obj = fit.to_json()
    obj["stationarity_margin"] = margin
    _write_json(args.out, obj, args)
    if margin <= 0:
        print(f"warning: stationarity margin {margin:.3f} <= 0 "
              "(sufficient condition fails)", file=sys.stderr)
    if args.residuals_out:
        resid_panel = pn.TimeSeriesPanel(labels=panel.labels, dates=panel.dates,
                                         values=fit.residuals)
        _write_panel(args.residuals_out, resid_panel, args)
        print(f"wrote {args.residuals_out}")
    print(f"wrote {args.out} (bic={fit.bic:.4f}, n_obs={fit.n_obs})")
    return 0


def cmd_select(args: argparse.Namespace) -> int:
    _require(args, "panel", "graph", "out")
    g = gg.read_graph_json(args.graph)
    panel = _aligned_panel(args, g)
    scheme = _load_scheme(args, g)
    p_max = args.pmax if args.pmax else sel.schwert_max_lag(panel.n_times)
    grid = sel.order_grid(p_max, args.smax)
    report = sel.select_model(panel, g, scheme, grid, criterion=args.criterion,
                              global_alpha=not args.vertex_alpha)
    header = ["rank", "model", "scheme", "global_alpha", "status",
              "bic", "aic", "loglik", "M", "n_obs", "reason"]
    rows = []
    for rank, c in enumerate(report.ranked(), start=1):
        rows.append([rank, c.order.name(), c.scheme_kind, c.global_alpha,
                     c.status, c.bic, c.aic, c.loglik, c.M, c.n_obs, ""])
    for c in report.candidates:
        if c.status != "ok":
            rows.append(["", c.order.name(), c.scheme_kind, c.global_alpha,
                         c.status, "", "", "", "", "",
                         c.reason.replace(",", ";")])
    _write_csv(args.out + ".csv", header, rows, args)
    _write_json(args.out + ".json", report.to_json(), args)
    print(f"{'rank':>4}  {'model':<22} {'bic':>12} {'aic':>12} {'M':>3} {'n_obs':>6}")
    for rank, c in enumerate(report.ranked()[:10], start=1):
        print(f"{rank:>4}  {c.order.name():<22} {c.bic:>12.4f} {c.aic:>12.4f} "
              f"{c.M:>3} {c.n_obs:>6}")
    print(f"wrote {args.out}.csv and {args.out}.json")
    return 0


def cmd_forecast(args: argparse.Namespace) -> int:
    _require(args, "panel", "graph", "p", "s")
    g = gg.read_graph_json(args.graph)
    panel = _aligned_panel(args, g)
    spec = _spec_from_args(args, g)
    h = args.holdout
    if h < 1 or h >= panel.n_times:
        raise InvalidInputError(f"--holdout {h} outside 1..{panel.n_times - 1}")
    train = pn.TimeSeriesPanel(labels=panel.labels, dates=panel.dates[:-h],
                               values=panel.values[:, :-h])
    fit = gc.fit(train, g, spec, method="ols")
    if args.mode == "rolling":
        preds = gc.forecast(fit, panel, h, mode="rolling_one_step")
    else:
        preds = gc.forecast(fit, train, h, mode="recursive")
    eval_dates = panel.dates[-h:]
    actual = panel.values[:, -h:]

    rows = []
    for j, d in enumerate(eval_dates):
        for i, lbl in enumerate(panel.labels):
            rows.append([d.isoformat(), lbl, actual[i, j], preds[i, j]])
    _write_csv(_out_path(args, "forecast.csv"),
               ["date", "node", "actual", "predicted"], rows, args)

    result = dg.mase(actual, preds, panel.values, labels=panel.labels)
    rows = []
    for i, lbl in enumerate(panel.labels):
        for j, d in enumerate(eval_dates):
            rows.append([lbl, d.isoformat(), result.entries[i, j]])
    _write_csv(_out_path(args, "mase.csv"),
               ["node", "date", "scaled_error"], rows, args)
    _write_json(_out_path(args, "mase_summary.json"), {
        "per_node_mean": dict(zip(result.labels,
                                  (float(v) for v in result.per_node_mean))),
        "overall_mean": result.overall_mean,
        "undefined_nodes": list(result.undefined_nodes),
        "mode": args.mode,
        "holdout": h,
    }, args)
    print(f"wrote forecast.csv, mase.csv, mase_summary.json "
          f"(overall MASE {result.overall_mean:.4f})")
    return 0


# ---------------------------------------------------------------------------
# simulate / diagnose / baseline
# ---------------------------------------------------------------------------

def cmd_simulate(args: argparse.Namespace) -> int:
    _require(args, "graph", "p", "s", "alpha", "beta", "T")
    g = gg.read_graph_json(args.graph)
    s = _parse_s(args.s)
    order = gc.GnarOrder(p=args.p, s=s)
    alpha = _parse_alpha(args.alpha)
    beta = _parse_beta(args.beta, s)
    scheme = (gc.WeightScheme(args.scheme) if args.scheme in ("spl", "uniform")
              else _load_scheme(args, g))
    spec = gc.GnarSpec(order=order, global_alpha=True, scheme=scheme)
    sigma = math.sqrt(args.sigma2) if args.sigma2 is not None else args.sigma
    if sigma is None:
        raise InvalidInputError("provide --sigma2 or --sigma")
    margin = gc.stationarity_margin(alpha, beta)
    if margin <= 0:
        print(f"warning: stationarity margin {margin:.3f} <= 0 "
              "(sufficient condition fails)", file=sys.stderr)

    panel = gc.simulate(spec, alpha, beta, g, T=args.T, sigma=sigma,
                        init_mean=args.init_mean, burn_in=args.burn_in,
                        seed=args.seed)
    _write_panel(_out_path(args, "panel.csv"), panel, args)
    sidecar = {
        "order": {"p": order.p, "s": list(order.s)},
        "alpha": alpha.tolist(),
        "beta": [b.tolist() for b in beta],
        "sigma": sigma,
        "init_mean": args.init_mean,
        "burn_in": args.burn_in,
        "T": args.T,
        "scheme": spec.scheme.kind,
        "stationarity_margin": margin,
        "labels": list(g.labels),
    }
    _write_json(_out_path(args, "params.json"), sidecar, args)
    written = ["panel.csv", "params.json"]

    if args.refit:
        fit = gc.fit(panel, g, spec, method="ols")
        names, true_vals, est = [], [], []
        for j in range(order.p):
            names.append(f"alpha{j + 1}")
            true_vals.append(float(alpha[j]))
            est.append(float(fit.alpha[j]))
            for r in range(order.s[j]):
                names.append(f"beta{j + 1}.{r + 1}")
                true_vals.append(float(beta[j][r]))
                est.append(float(fit.beta[j][r]))
        se_map = dict(zip(fit.column_names, fit.gamma_se))
        rows = []
        for nm, tv, ev in zip(names, true_vals, est):
            lo = ev - 1.96 * se_map[nm]
            hi = ev + 1.96 * se_map[nm]
            rows.append([nm, tv, ev, lo, hi, "yes" if lo <= tv <= hi else "no"])
        _write_csv(_out_path(args, "refit_table.csv"),
                   ["coefficient", "true", "estimate", "ci_lower", "ci_upper",
                    "covered"],
                   rows, args)
        written.append("refit_table.csv")
        covered = sum(1 for r in rows if r[5] == "yes")
        print(f"refit: {covered}/{len(rows)} true values inside the 95% CI")
    print(f"wrote {', '.join(written)}")
    return 0


def cmd_diagnose(args: argparse.Namespace) -> int:
    sub = args.diag_cmd
    _require(args, "out")
    if sub == "moran":
        _require(args, "panel", "graph")
        g = gg.read_graph_json(args.graph)
        panel = _aligned_panel(args, g)
        res = dg.moran_permutation_test(panel, g, R=args.R, seed=args.seed,
                                        rank_based=args.rank)
        rows = []
        for t, d in enumerate(res.dates):
            if not res.tested[t]:
                continue
            rows.append([d.isoformat(), res.observed[t], res.lower[t],
                         res.median[t], res.upper[t],
                         "yes" if res.outside[t] else "no"])
        _write_csv(args.out + ".csv",
                   ["date", "I", "lower", "median", "upper", "outside"],
                   rows, args)
        _write_json(args.out + ".json", {
            "n_m": res.n_m,
            "tested_dates": int(res.tested.sum()),
            "outside": int(res.outside.sum()),
            "R": res.R,
            "rank_based": res.rank_based,
            "skipped": list(res.skipped_reasons),
        }, args)
        print(f"N_m = {res.n_m:.4f} over {int(res.tested.sum())} dates; "
              f"wrote {args.out}.csv/.json")
    elif sub == "ks":
        _require(args, "panel")
        panel = pn.read_wide_csv(args.panel)
        results = dg.ks_normality(panel)
        _write_json(args.out, {"tests": {
            lbl: {"statistic": r.statistic, "p_value": r.p_value,
                  "parameters": r.parameters}
            for lbl, r in results.items()}}, args)
        n_rej = sum(1 for r in results.values()
                    if not math.isnan(r.p_value) and r.p_value <= 0.025)
        print(f"{n_rej}/{len(results)} nodes rejected at p <= 0.025; wrote {args.out}")
    elif sub == "ljungbox":
        _require(args, "panel")
        panel = pn.read_wide_csv(args.panel)
        results = dg.ljung_box_panel(panel, max_lag=args.max_lag)
        _write_json(args.out, {"tests": {
            lbl: {"statistic": r.statistic, "p_value": r.p_value,
                  "parameters": r.parameters}
            for lbl, r in results.items()}}, args)
        print(f"wrote {args.out}")
    else:
        raise InvalidInputError(f"unknown diagnose subcommand {sub!r}")
    return 0


def cmd_baseline(args: argparse.Namespace) -> int:
    _require(args, "panel", "pmax")
    panel = pn.read_wide_csv(args.panel)
    h = args.holdout
    train = panel
    if h:
        if h < 1 or h >= panel.n_times:
            raise InvalidInputError(f"--holdout {h} outside 1..{panel.n_times - 1}")
        train = pn.TimeSeriesPanel(labels=panel.labels, dates=panel.dates[:-h],
                                   values=panel.values[:, :-h])
    results = sel.fit_ar_baseline(train, args.pmax)
    _write_json(_out_path(args, "ar.json"),
                {"nodes": {lbl: r.to_json() for lbl, r in results.items()}},
                args)
    written = ["ar.json"]
    if h:
        preds = np.full((panel.n_nodes, h), np.nan)
        for i, lbl in enumerate(panel.labels):
            r = results[lbl]
            if r.status == "ok":
                preds[i] = sel.ar_rolling_forecast(r, panel.values[i], h)
        eval_dates = panel.dates[-h:]
        rows = []
        for j, d in enumerate(eval_dates):
            for i, lbl in enumerate(panel.labels):
                rows.append([d.isoformat(), lbl, panel.values[i, -h + j], preds[i, j]])
        _write_csv(_out_path(args, "ar_forecast.csv"),
                   ["date", "node", "actual", "predicted"], rows, args)
        res = dg.mase(panel.values[:, -h:], preds, panel.values, labels=panel.labels)
        _write_json(_out_path(args, "ar_mase.json"), {
            "per_node_mean": dict(zip(res.labels,
                                      (float(v) for v in res.per_node_mean))),
            "overall_mean": res.overall_mean,
        }, args)
        written += ["ar_forecast.csv", "ar_mase.json"]
    print(f"wrote {', '.join(written)}")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with default option values")
    common.add_argument("--seed", type=int, default=0)

    parser = argparse.ArgumentParser(
        prog="gnar",
        description="Network autoregressive modeling: build spatial networks, "
                    "prepare panels, fit and select models, forecast, simulate, "
                    "and run diagnostics.")
    sub = parser.add_subparsers(dest="command", required=True)

    net = sub.add_parser("network", help="build or summarize networks")
    net_sub = net.add_subparsers(dest="net_cmd", required=True)
    nb = net_sub.add_parser("build", parents=[common],
                            help="construct a network and write JSON")
    nb.add_argument("--kind",
                    choices=["knn", "dnn", "delaunay", "gabriel", "soi",
                             "relative", "edgelist", "hub", "complete"])
    nb.add_argument("--points", help="CSV node,lat,lon[,population]")
    nb.add_argument("--edges", help="CSV from,to (edgelist/hub kinds)")
    nb.add_argument("--hubs", help="comma-separated hub labels (hub kind)")
    nb.add_argument("--k", type=int, help="neighbour count (knn)")
    nb.add_argument("--d-max", type=float, help="distance threshold km (dnn)")
    nb.add_argument("--n", type=int, help="node count (complete without points)")
    nb.add_argument("--out")
    nb.set_defaults(func=cmd_network_build)
    ns = net_sub.add_parser("summarize", parents=[common],
                            help="structural summary with G(n,m) baseline")
    ns.add_argument("--graph")
    ns.add_argument("--brg-samples", type=int, default=100)
    ns.add_argument("--out")
    ns.set_defaults(func=cmd_network_summarize)

    data = sub.add_parser("data", help="panel preparation")
    data_sub = data.add_subparsers(dest="data_cmd", required=True)
    di = data_sub.add_parser("ingest", parents=[common],
                             help="pivot long CSV to a wide panel")
    di.add_argument("--csv")
    dw = data_sub.add_parser("weekly", parents=[common],
                             help="weekly incidence from daily cumulative")
    dw.add_argument("--panel")
    dw.add_argument("--tolerance", type=float, default=0.0)
    dsm = data_sub.add_parser("smooth", parents=[common],
                              help="centered moving average in an interval")
    dsm.add_argument("--panel")
    dsm.add_argument("--window", type=int)
    dsm.add_argument("--start", help="ISO date")
    dsm.add_argument("--end", help="ISO date")
    dd = data_sub.add_parser("diff", parents=[common], help="lag differencing")
    dd.add_argument("--panel")
    dd.add_argument("--lag", type=int, default=1)
    dp = data_sub.add_parser("phases", parents=[common],
                             help="restrict to a phase spec")
    dp.add_argument("--panel")
    dp.add_argument("--spec", help="phase spec JSON")
    db = data_sub.add_parser("boxcox", parents=[common],
                             help="Box-Cox profile likelihood")
    db.add_argument("--panel")
    db.add_argument("--node", help="profile one node instead of the pooled panel")
    db.add_argument("--grid-min", type=float, default=-2.0)
    db.add_argument("--grid-max", type=float, default=3.0)
    db.add_argument("--grid-steps", type=int, default=101)
    for p in (di, dw, dsm, dd, dp, db):
        p.add_argument("--out")
        p.set_defaults(func=cmd_data)

    fit_p = sub.add_parser("fit", parents=[common], help="fit one model")
    fit_p.add_argument("--panel")
    fit_p.add_argument("--graph")
    fit_p.add_argument("--scheme", default="spl",
                       choices=["spl", "uniform", "idw", "pb"])
    fit_p.add_argument("--points", help="needed for idw/pb schemes")
    fit_p.add_argument("--p", type=int)
    fit_p.add_argument("--s", help="comma-separated stages, e.g. 2,1,0")
    fit_p.add_argument("--vertex-alpha", action="store_true",
                       help="node-specific own-lag coefficients")
    fit_p.add_argument("--method", default="ols", choices=["ols", "egls"])
    fit_p.add_argument("--residuals-out", help="also write the residual panel")
    fit_p.add_argument("--out")
    fit_p.set_defaults(func=cmd_fit)

    sel_p = sub.add_parser("select", parents=[common], help="BIC/AIC grid search")
    sel_p.add_argument("--panel")
    sel_p.add_argument("--graph")
    sel_p.add_argument("--scheme", default="spl",
                       choices=["spl", "uniform", "idw", "pb"])
    sel_p.add_argument("--points")
    sel_p.add_argument("--pmax", type=int,
                       help="lag cap; defaults to Schwert's rule on the panel length")
    sel_p.add_argument("--smax", type=int, default=5)
    sel_p.add_argument("--criterion", default="bic", choices=["bic", "aic"])
    sel_p.add_argument("--vertex-alpha", action="store_true")
    sel_p.add_argument("--out", help="base path; writes <out>.csv and <out>.json")
    sel_p.set_defaults(func=cmd_select)

    fc = sub.add_parser("forecast", parents=[common],
                        help="hold out weeks, fit, predict, score")
    fc.add_argument("--panel")
    fc.add_argument("--graph")
    fc.add_argument("--scheme", default="spl",
                    choices=["spl", "uniform", "idw", "pb"])
    fc.add_argument("--points")
    fc.add_argument("--p", type=int)
    fc.add_argument("--s")
    fc.add_argument("--vertex-alpha", action="store_true")
    fc.add_argument("--holdout", type=int, default=5)
    fc.add_argument("--mode", default="rolling", choices=["rolling", "recursive"])
    fc.add_argument("--out-dir", default=".")
    fc.set_defaults(func=cmd_forecast)

    sim = sub.add_parser("simulate", parents=[common],
                         help="simulate a panel from the model")
    sim.add_argument("--graph")
    sim.add_argument("--p", type=int)
    sim.add_argument("--s")
    sim.add_argument("--alpha", help="comma-separated, one per lag")
    sim.add_argument("--beta",
                     help="semicolon-separated lag groups of comma-separated "
                          "stage values, e.g. '0.14,0.41;-0.07;0.03;0.14;0.01'")
    sim.add_argument("--T", type=int)
    sim.add_argument("--sigma", type=float, help="innovation standard deviation")
    sim.add_argument("--sigma2", type=float, help="innovation variance")
    sim.add_argument("--init-mean", type=float, default=0.0)
    sim.add_argument("--burn-in", type=int, default=0)
    sim.add_argument("--scheme", default="uniform",
                     choices=["spl", "uniform", "idw", "pb"])
    sim.add_argument("--points")
    sim.add_argument("--refit", action="store_true",
                     help="refit the generating model and write a truth/estimate "
                          "table with 95%% CIs")
    sim.add_argument("--out-dir", default=".")
    sim.set_defaults(func=cmd_simulate)

    diag = sub.add_parser("diagnose", help="residual and dependence diagnostics")
    diag_sub = diag.add_subparsers(dest="diag_cmd", required=True)
    dm = diag_sub.add_parser("moran", parents=[common],
                             help="permutation test of spatial correlation")
    dm.add_argument("--panel")
    dm.add_argument("--graph")
    dm.add_argument("--R", type=int, default=100)
    dm.add_argument("--rank", action="store_true", help="use rank-based values")
    dm.add_argument("--out", help="base path; writes <out>.csv and <out>.json")
    dm.set_defaults(func=cmd_diagnose)
    dk = diag_sub.add_parser("ks", parents=[common],
                             help="per-node normality of residuals")
    dk.add_argument("--panel", help="residual panel (wide CSV)")
    dk.add_argument("--out")
    dk.set_defaults(func=cmd_diagnose)
    dl = diag_sub.add_parser("ljungbox", parents=[common],
                             help="per-node whiteness of residuals")
    dl.add_argument("--panel", help="residual panel (wide CSV)")
    dl.add_argument("--max-lag", type=int)
    dl.add_argument("--out")
    dl.set_defaults(func=cmd_diagnose)

    base = sub.add_parser("baseline", help="per-node AR reference model")
    base_sub = base.add_subparsers(dest="base_cmd", required=True)
    ba = base_sub.add_parser("ar", parents=[common],
                             help="fit AR(p) per node with BIC order choice")
    ba.add_argument("--panel")
    ba.add_argument("--pmax", type=int)
    ba.add_argument("--holdout", type=int, default=0)
    ba.add_argument("--out-dir", default=".")
    ba.set_defaults(func=cmd_baseline)

    return parser


def _apply_config(args: argparse.Namespace, argv: list[str]) -> None:
    """Fill options from the config file unless given on the command line."""
    if not getattr(args, "config", None):
        return
    with open(args.config) as fh:
        config = json.load(fh)
    if not isinstance(config, dict):
        raise InvalidInputError("--config must contain a flat JSON object")
    for key, value in config.items():
        dest = key.replace("-", "_")
        if not hasattr(args, dest):
            raise InvalidInputError(
                f"config key {key!r} is not an option of this subcommand")
        flag = "--" + key.replace("_", "-")
        on_cli = any(a == flag or a.startswith(flag + "=") for a in argv)
        if not on_cli:
            setattr(args, dest, value)


def main(argv: Optional[list[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    args.argv = ["gnar", *argv]
    try:
        _apply_config(args, argv)
        return args.func(args)
    except GnarError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
