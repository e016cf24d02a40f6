"""Order-grid enumeration, BIC model search, and the per-node AR baseline.

The candidate grid is a hand-encoded catalogue of stage vectors (lengths 1
to 5), machine-expanded: entries exceeding the stage cap are dropped and
every base vector is zero-padded to each admissible lag length, so e.g. the
base (1, 1, 1, 1) also yields the lag-5 candidate (1, 1, 1, 1, 0).  The lag
cap itself usually comes from Schwert's rule.

The search fits every admissible candidate on the same panel and ranks by
BIC (or AIC); candidates whose stages are empty somewhere, or whose designs
are singular or too short, are recorded as skipped rather than failing the
whole search.  The AR baseline fits each node's series independently with
the same least-squares and criterion conventions, which keeps the
network-vs-no-network comparison meaningful.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import (
    InsufficientDataError,
    InvalidInputError,
    ModelInadmissibleError,
    SelectionFailedError,
    SingularDesignError,
)
from .geo_graph import Graph, stage_neighbourhoods
from .gnar_core import (
    GnarFit,
    GnarOrder,
    GnarSpec,
    WeightScheme,
    build_design,
    compute_weights,
    fit_ols,
)
from .panel import TimeSeriesPanel

# Stage-vector catalogue, lengths 1-5.  Fixed literal data; the grid builder
# filters by the stage cap and zero-pads to higher lag orders.
BETA_CATALOGUE: tuple[tuple[int, ...], ...] = (
    (1,), (2,), (3,), (4,), (5,), (6,), (7,),
    (1, 1), (2, 1), (3, 1), (4, 1), (5, 1),
    (2, 2),
    (1, 1, 1), (2, 1, 1), (3, 1, 1), (4, 1, 1), (5, 1, 1),
    (2, 2, 1),
    (2, 2, 2), (3, 2, 2), (4, 2, 2), (5, 2, 2),
    (1, 1, 1, 1), (2, 1, 1, 1), (3, 1, 1, 1), (4, 1, 1, 1), (5, 1, 1, 1),
    (2, 2, 1, 1), (2, 2, 2, 1), (3, 2, 2, 1), (4, 2, 2, 1), (5, 2, 2, 1),
    (2, 2, 2, 2),
    (1, 1, 1, 1, 1), (2, 1, 1, 1, 1), (3, 1, 1, 1, 1), (4, 1, 1, 1, 1),
    (5, 1, 1, 1, 1),
    (2, 2, 1, 1, 1), (3, 2, 2, 1, 1), (4, 2, 2, 1, 1), (5, 2, 2, 1, 1),
    (2, 2, 2, 1, 1), (2, 2, 2, 2, 1), (2, 2, 2, 2, 2),
)


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OrderGrid:
    """Deduplicated, deterministically ordered candidate orders."""

    candidates: tuple[GnarOrder, ...]
    p_max: int
    s_max: int

    def __len__(self) -> int:
        return len(self.candidates)

    def __iter__(self):
        return iter(self.candidates)


@dataclass(frozen=True)
class CandidateResult:
    """One fitted (or skipped) candidate in a selection run."""

    order: GnarOrder
    scheme_kind: str
    global_alpha: bool
    status: str  # 'ok', 'inadmissible', 'singular', 'insufficient'
    reason: str = ""
    bic: float = math.nan
    aic: float = math.nan
    loglik: float = math.nan
    M: int = 0
    n_obs: int = 0
    fit: Optional[GnarFit] = None

    def to_json(self) -> dict:
        return {
            "order": {"p": self.order.p, "s": list(self.order.s)},
            "name": self.order.name(),
            "scheme": self.scheme_kind,
            "global_alpha": self.global_alpha,
            "status": self.status,
            "reason": self.reason,
            "bic": self.bic,
            "aic": self.aic,
            "loglik": self.loglik,
            "M": self.M,
            "n_obs": self.n_obs,
        }


@dataclass(frozen=True)
class SelectionReport:
    """All candidates of a search plus the criterion-based ranking."""

    candidates: tuple[CandidateResult, ...]
    criterion: str

    def ranked(self) -> list[CandidateResult]:
        """Fitted candidates, ascending criterion; ties broken by smaller M
        then lexicographic order."""
        ok = [c for c in self.candidates if c.status == "ok"]
        key = (lambda c: (c.bic, c.M, (c.order.p, c.order.s))
               if self.criterion == "bic"
               else (c.aic, c.M, (c.order.p, c.order.s)))
        return sorted(ok, key=key)

    @property
    def best(self) -> CandidateResult:
        ranked = self.ranked()
        if not ranked:
            raise SelectionFailedError("no candidate was successfully fitted")
        return ranked[0]

    def to_json(self) -> dict:
        return {
            "criterion": self.criterion,
            "best": self.best.to_json() if self.ranked() else None,
            "candidates": [c.to_json() for c in self.ranked()]
                          + [c.to_json() for c in self.candidates
                             if c.status != "ok"],
        }


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def schwert_max_lag(T: int) -> int:
    """Maximum lag heuristic: floor(12 * (T / 100)^(1/4))."""
    if T < 1:
        raise InvalidInputError("T must be >= 1")
    return int(math.floor(12.0 * (T / 100.0) ** 0.25))


def order_grid(p_max: int, s_max: int) -> OrderGrid:
    """Expand the stage-vector catalogue into an order grid.

    Keeps catalogue entries whose stages all fit within ``s_max``, then
    zero-pads each to every lag length up to ``p_max``.  Output is
    deduplicated and sorted by (p, s), identical across runs and platforms.
    """
    if p_max < 1 or s_max < 1:
        raise InvalidInputError("p_max and s_max must be >= 1")
    seen: set[tuple[int, ...]] = set()
    for base in BETA_CATALOGUE:
        if len(base) > p_max or max(base) > s_max:
            continue
        for p in range(len(base), p_max + 1):
            seen.add(base + (0,) * (p - len(base)))
    candidates = tuple(GnarOrder(p=len(s), s=s)
                       for s in sorted(seen, key=lambda s: (len(s), s)))
    return OrderGrid(candidates=candidates, p_max=p_max, s_max=s_max)


def select_model(panel: TimeSeriesPanel, g: Graph, scheme: WeightScheme,
                 grid: OrderGrid, criterion: str = "bic",
                 global_alpha: bool = True) -> SelectionReport:
    """Fit every admissible grid candidate and rank by the criterion.

    Inadmissible candidates (an empty stage somewhere), singular designs
    and too-short panels are recorded as skipped with their reason; the
    search only fails when nothing at all could be fitted.  Candidates with
    longer lags use fewer stacked rows and are compared on their own n_obs.
    """
    if criterion not in ("bic", "aic"):
        raise InvalidInputError("criterion must be 'bic' or 'aic'")
    if len(grid) == 0:
        raise InvalidInputError("empty candidate grid")
    if tuple(panel.labels) != tuple(g.labels):
        raise InvalidInputError("panel and graph label order differ")

    r_needed = max(max(c.max_stage for c in grid), 1)
    stages = stage_neighbourhoods(g, r_needed)
    weights = compute_weights(g, stages, scheme)

    results: list[CandidateResult] = []
    for order in grid:
        spec = GnarSpec(order=order, global_alpha=global_alpha, scheme=scheme)
        try:
            design, response, rows = build_design(panel, spec, weights, stages)
            fit = fit_ols(design, response, spec, panel.n_nodes, panel.n_times,
                          row_index=rows, labels=panel.labels, weight_set=weights)
        except ModelInadmissibleError as exc:
            results.append(CandidateResult(order, scheme.kind, global_alpha,
                                           "inadmissible", str(exc)))
            continue
        except SingularDesignError as exc:
            results.append(CandidateResult(order, scheme.kind, global_alpha,
                                           "singular", str(exc)))
            continue
        except InsufficientDataError as exc:
            results.append(CandidateResult(order, scheme.kind, global_alpha,
                                           "insufficient", str(exc)))
            continue
        results.append(CandidateResult(
            order, scheme.kind, global_alpha, "ok", "",
            bic=fit.bic, aic=fit.aic, loglik=fit.loglik, M=fit.M,
            n_obs=fit.n_obs, fit=fit))

    report = SelectionReport(candidates=tuple(results), criterion=criterion)
    if not report.ranked():
        reasons = "; ".join(f"{c.order.name()}: {c.status} ({c.reason})"
                            for c in results)
        raise SelectionFailedError(f"all candidates failed -- {reasons}")
    return report


# ---------------------------------------------------------------------------
# Per-node AR baseline
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ArNodeResult:
    """Independent AR fit for one node's own series."""

    label: str
    status: str  # 'ok' or 'degenerate'
    order: int = 0
    coefficients: tuple[float, ...] = ()
    sigma2: float = math.nan
    bic: float = math.nan
    n_obs: int = 0
    one_step_predictions: Optional[np.ndarray] = None  # panel-length, NaN pads

    def to_json(self) -> dict:
        return {
            "node": self.label,
            "status": self.status,
            "order": self.order,
            "coefficients": list(self.coefficients),
            "sigma2": self.sigma2,
            "bic": self.bic,
            "n_obs": self.n_obs,
        }


def _ar_design(x: np.ndarray, p: int) -> tuple[np.ndarray, np.ndarray, list[int]]:
    rows, ys, ts = [], [], []
    for t in range(p, x.size):
        window = x[t - p:t][::-1]  # lags 1..p
        if math.isnan(x[t]) or np.isnan(window).any():
            continue
        rows.append(window)
        ys.append(x[t])
        ts.append(t)
    return np.asarray(rows), np.asarray(ys), ts


def fit_ar_baseline(panel: TimeSeriesPanel, p_max: int) -> dict[str, ArNodeResult]:
    """Per-node AR(p) fits with BIC order choice, 1 <= p <= p_max.

    Each node is fitted on its own series only, with no intercept and the
    same Gaussian-likelihood BIC convention as the network model.  Nodes
    with a constant series or too few observations are flagged degenerate
    and the rest proceed.
    """
    if p_max < 1:
        raise InvalidInputError("p_max must be >= 1")
    out: dict[str, ArNodeResult] = {}
    for i, label in enumerate(panel.labels):
        x = panel.values[i]
        observed = x[~np.isnan(x)]
        if observed.size <= p_max + 1 or np.nanstd(x) == 0.0:
            out[label] = ArNodeResult(label=label, status="degenerate")
            continue
        best: Optional[tuple[float, int, np.ndarray, float, int, list[int], np.ndarray]] = None
        for p in range(1, p_max + 1):
            design, y, ts = _ar_design(x, p)
            if design.size == 0 or design.shape[0] <= p:
                continue
            coef, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
            if rank < p:
                continue
            resid = y - design @ coef
            n_obs = y.size
            sigma2 = float(resid @ resid) / n_obs
            if sigma2 <= 0:
                sigma2 = np.finfo(float).tiny
            loglik = -0.5 * n_obs * (math.log(2.0 * math.pi * sigma2) + 1.0)
            bic = p * math.log(n_obs) - 2.0 * loglik
            if best is None or bic < best[0]:
                best = (bic, p, coef, sigma2, n_obs, ts, design)
        if best is None:
            out[label] = ArNodeResult(label=label, status="degenerate")
            continue
        bic, p, coef, sigma2, n_obs, ts, design = best
        preds = np.full(panel.n_times, np.nan)
        preds[ts] = design @ coef
        out[label] = ArNodeResult(
            label=label, status="ok", order=p,
            coefficients=tuple(float(c) for c in coef),
            sigma2=sigma2, bic=bic, n_obs=n_obs, one_step_predictions=preds)
    return out


def ar_rolling_forecast(result: ArNodeResult, history: np.ndarray,
                        horizon: int) -> np.ndarray:
    """One-step predictions for the last ``horizon`` points of ``history``
    using a fitted AR node result and the true preceding values."""
    if result.status != "ok":
        raise InvalidInputError(f"node {result.label!r} has no usable AR fit")
    p = result.order
    x = np.asarray(history, dtype=float)
    if x.size < p + horizon:
        raise InvalidInputError("history too short for the requested horizon")
    coef = np.asarray(result.coefficients)
    preds = np.empty(horizon)
    for h in range(horizon):
        t = x.size - horizon + h
        preds[h] = float(coef @ x[t - p:t][::-1])
    return preds
