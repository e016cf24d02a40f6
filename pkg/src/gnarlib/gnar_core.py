"""Network autoregressive model: weights, design, estimation, simulation.

The model regresses each node's value on its own past values (one
coefficient per lag, either shared across nodes or node-specific) and on
weighted averages of its r-th stage neighbourhoods' past values (one
coefficient per lag and stage):

    X[i, t] = sum_j ( alpha[i, j] * X[i, t - j]
                      + sum_r beta[j, r] * sum_{q in stage r of i}
                            w[i, q] * X[q, t - j] ) + eps[i, t]

Estimation is restricted least squares on a stacked design with one row per
(node, time) pair; the restriction matrix maps the M free parameters into
the full VAR coefficient vector, and an estimated-GLS variant whitens rows
time-block by time-block with a residual covariance estimate.  The module
also provides seeded simulation from the model, one-step/recursive
forecasting, and a sufficient-condition stationarity margin.

Estimation assumes i.i.d. Gaussian errors with a single profiled variance;
information criteria are reported under that convention (BIC =
M*log(n_obs) - 2*loglik).
"""

from __future__ import annotations

import datetime
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import (
    FeasibilityError,
    InsufficientDataError,
    InvalidInputError,
    ModelInadmissibleError,
    SingularDesignError,
)
from .geo_graph import Graph, StageNeighbourhoods, stage_neighbourhoods
from .panel import TimeSeriesPanel

WEIGHT_KINDS = ("spl", "uniform", "idw", "pb")


# ---------------------------------------------------------------------------
# Specification types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GnarOrder:
    """Model order: lag count p and per-lag maximum neighbourhood stage s.

    ``s`` has length p; ``s[j - 1] == 0`` means lag j enters with no
    neighbourhood term.
    """

    p: int
    s: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.p < 1:
            raise InvalidInputError("lag order p must be >= 1")
        object.__setattr__(self, "s", tuple(int(v) for v in self.s))
        if len(self.s) != self.p:
            raise InvalidInputError(f"s has length {len(self.s)}, expected p={self.p}")
        if any(v < 0 for v in self.s):
            raise InvalidInputError("stage orders must be nonnegative")

    @property
    def max_stage(self) -> int:
        return max(self.s) if self.s else 0

    def n_beta(self) -> int:
        return int(sum(self.s))

    def name(self) -> str:
        """Compact display form, e.g. GNAR(2,[1,0])."""
        return f"GNAR({self.p},[{','.join(str(v) for v in self.s)}])"


@dataclass(frozen=True)
class WeightScheme:
    """How within-stage neighbour weights are computed.

    Kinds:
        spl      -- normalised inverse shortest path length.  All members of
                    stage r sit at SPL exactly r, so this normalises to the
                    uniform weight 1/|stage|; kept as a separate kind for
                    explicitness.
        uniform  -- 1 / |stage| directly.
        idw      -- proportional to inverse great-circle distance; needs
                    ``dist_km``.
        pb       -- proportional to population / distance; needs ``dist_km``
                    and ``populations``.

    ``dist_km`` is an N x N matrix and ``populations`` a length-N vector,
    both aligned with the graph's label order.
    """

    kind: str
    dist_km: Optional[np.ndarray] = None
    populations: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        if self.kind not in WEIGHT_KINDS:
            raise InvalidInputError(
                f"unknown weight kind {self.kind!r}; expected one of {WEIGHT_KINDS}")
        if self.kind in ("idw", "pb") and self.dist_km is None:
            raise InvalidInputError(f"scheme {self.kind!r} requires dist_km")
        if self.kind == "pb" and self.populations is None:
            raise InvalidInputError("scheme 'pb' requires populations")


@dataclass(frozen=True)
class WeightSet:
    """Normalised neighbour weights per node and stage.

    ``weights[i][r - 1]`` maps neighbour index q -> w[i, q] over the r-th
    stage of node i; each nonempty stage's weights sum to 1.
    """

    r_max: int
    weights: tuple[tuple[dict[int, float], ...], ...]

    def stage_weights(self, node: int, r: int) -> dict[int, float]:
        return self.weights[node][r - 1]

    def matrix(self, r: int, n: int) -> np.ndarray:
        """Dense stage-r weight matrix W with W[l, m] = w[l, m]."""
        w = np.zeros((n, n))
        for l in range(n):
            for m, v in self.weights[l][r - 1].items():
                w[l, m] = v
        return w


@dataclass(frozen=True)
class GnarSpec:
    """Full model specification: order, alpha sharing, weight scheme."""

    order: GnarOrder
    global_alpha: bool = True
    scheme: WeightScheme = field(default_factory=lambda: WeightScheme("spl"))

    def n_params(self, n_nodes: int) -> int:
        base = self.order.p if self.global_alpha else n_nodes * self.order.p
        return base + self.order.n_beta()


@dataclass(frozen=True)
class RestrictionMatrix:
    """Linear map from the M free parameters into vec of the VAR matrix.

    ``matrix`` has shape (p * N^2, M); stacking is column-major per lag
    block, lag blocks concatenated.  ``column_names`` label the free
    parameters in design-column order.
    """

    matrix: np.ndarray
    column_names: tuple[str, ...]


@dataclass(frozen=True)
class GnarFit:
    """Fitted model: coefficients, residuals, likelihood and criteria.

    ``alpha`` has shape (p,) for a global-alpha fit and (N, p) otherwise;
    ``beta[j - 1]`` holds the stage coefficients for lag j.  ``residuals``
    is panel-shaped (N x T) with NaN outside the fitted rows.  ``sigma2``
    is the pooled residual variance; ``sigma_full`` carries the N x N
    covariance estimate when the fit used one.
    """

    spec: GnarSpec
    labels: tuple[str, ...]
    gamma: np.ndarray
    gamma_se: np.ndarray
    column_names: tuple[str, ...]
    alpha: np.ndarray
    beta: tuple[np.ndarray, ...]
    sigma2: float
    residuals: Optional[np.ndarray]
    n_obs: int
    M: int
    loglik: float
    bic: float
    aic: float
    sigma_full: Optional[np.ndarray] = None
    weight_set: Optional[WeightSet] = None

    def to_json(self) -> dict:
        obj = {
            "order": {"p": self.spec.order.p, "s": list(self.spec.order.s)},
            "global_alpha": self.spec.global_alpha,
            "scheme": self.spec.scheme.kind,
            "labels": list(self.labels),
            "alpha": self.alpha.tolist(),
            "beta": [b.tolist() for b in self.beta],
            "gamma": self.gamma.tolist(),
            "gamma_se": self.gamma_se.tolist(),
            "coefficients": dict(zip(self.column_names,
                                     (float(v) for v in self.gamma))),
            "sigma2": self.sigma2,
            "loglik": self.loglik,
            "bic": self.bic,
            "aic": self.aic,
            "n_obs": self.n_obs,
            "M": self.M,
        }
        return obj


# ---------------------------------------------------------------------------
# Weights
# ---------------------------------------------------------------------------

def compute_weights(g: Graph, stages: StageNeighbourhoods,
                    scheme: WeightScheme) -> WeightSet:
    """Normalised within-stage weights for every node and stage.

    For 'spl' all stage-r members are at SPL exactly r, so the normalised
    inverse-SPL weights equal the uniform 1/|stage| weights; both kinds go
    through the same computation and produce identical output.
    """
    n = g.n
    if scheme.kind in ("idw", "pb"):
        d = np.asarray(scheme.dist_km, dtype=float)
        if d.shape != (n, n):
            raise InvalidInputError(
                f"dist_km shape {d.shape} does not match n={n}")
    if scheme.kind == "pb":
        pop = np.asarray(scheme.populations, dtype=float)
        if pop.shape != (n,):
            raise InvalidInputError(
                f"populations shape {pop.shape} does not match n={n}")
        if np.any(~np.isfinite(pop)) or np.any(pop <= 0):
            raise InvalidInputError("populations must be finite and positive")

    out: list[tuple[dict[int, float], ...]] = []
    for i in range(n):
        per_stage: list[dict[int, float]] = []
        for r in range(1, stages.r_max + 1):
            members = sorted(stages.stage(i, r))
            if not members:
                per_stage.append({})
                continue
            if scheme.kind in ("spl", "uniform"):
                # every member of stage r sits at SPL r: inverse SPL is flat
                w = 1.0 / len(members)
                per_stage.append({q: w for q in members})
            else:
                raw = []
                for q in members:
                    dq = d[i, q]
                    if not dq > 0:
                        raise InvalidInputError(
                            f"nonpositive distance between nodes {g.labels[i]!r} "
                            f"and {g.labels[q]!r}")
                    raw.append(1.0 / dq if scheme.kind == "idw" else pop[q] / dq)
                total = sum(raw)
                per_stage.append({q: v / total for q, v in zip(members, raw)})
        out.append(tuple(per_stage))
    return WeightSet(r_max=stages.r_max, weights=tuple(out))


# ---------------------------------------------------------------------------
# Restriction matrix and design
# ---------------------------------------------------------------------------

def _validate_stages(order: GnarOrder, stages: StageNeighbourhoods,
                     labels: Sequence[str]) -> None:
    """Every stage a lag uses must be nonempty for every node."""
    if order.max_stage > stages.r_max:
        raise InvalidInputError(
            f"order uses stage {order.max_stage} but only {stages.r_max} computed")
    for j, sj in enumerate(order.s, start=1):
        for r in range(1, sj + 1):
            for i in range(len(labels)):
                if not stages.stage(i, r):
                    raise ModelInadmissibleError(
                        f"stage {r} (lag {j}) is empty for node {labels[i]!r}")


def coefficient_names(spec: GnarSpec, labels: Sequence[str]) -> tuple[str, ...]:
    """Design column names: alpha block (lag-major) then beta block."""
    names: list[str] = []
    for j in range(1, spec.order.p + 1):
        if spec.global_alpha:
            names.append(f"alpha{j}")
        else:
            names.extend(f"alpha{j}[{lbl}]" for lbl in labels)
    for j, sj in enumerate(spec.order.s, start=1):
        names.extend(f"beta{j}.{r}" for r in range(1, sj + 1))
    return tuple(names)


def restriction_matrix(spec: GnarSpec, weights: WeightSet, n: int,
                       labels: Optional[Sequence[str]] = None) -> RestrictionMatrix:
    """Matrix R with vec(B) = R gamma.

    Unstacking R gamma into p column-major N x N blocks yields, for block j,
    diag entries equal to the alpha coordinates of gamma and entry (l, m)
    equal to beta[j, r] * w[l, m] whenever m lies in stage r of l.
    """
    order = spec.order
    labels = tuple(labels) if labels is not None else tuple(f"v{i}" for i in range(n))
    stages_proxy = _stages_from_weights(weights)
    _validate_stages(order, stages_proxy, labels)
    M = spec.n_params(n)
    R = np.zeros((order.p * n * n, M))
    names = coefficient_names(spec, labels)
    w_mats = {r: weights.matrix(r, n) for r in range(1, order.max_stage + 1)}

    for j in range(order.p):
        block = j * n * n
        if spec.global_alpha:
            for l in range(n):
                R[block + l * n + l, j] = 1.0  # column-major: (l, l) -> l*n + l
        else:
            for l in range(n):
                R[block + l * n + l, j * n + l] = 1.0
    col = order.p if spec.global_alpha else order.p * n
    for j, sj in enumerate(order.s):
        block = j * n * n
        for r in range(1, sj + 1):
            w = w_mats[r]
            for m in range(n):  # vec is column-major: column m occupies m*n..m*n+n-1
                R[block + m * n: block + (m + 1) * n, col] = w[:, m]
            col += 1
    return RestrictionMatrix(matrix=R, column_names=names)


def _stages_from_weights(weights: WeightSet) -> StageNeighbourhoods:
    stages = tuple(
        tuple(frozenset(d.keys()) for d in per_node)
        for per_node in weights.weights)
    return StageNeighbourhoods(r_max=weights.r_max, stages=stages)


def build_design(panel: TimeSeriesPanel, spec: GnarSpec, weights: WeightSet,
                 stages: StageNeighbourhoods
                 ) -> tuple[np.ndarray, np.ndarray, list[tuple[int, int]]]:
    """Stacked regression design for the model.

    One row per (node i, time t) with t > p for which the response and all
    needed lagged own and neighbourhood terms are observed; a missing value
    anywhere in a node's stage poisons exactly the rows whose neighbourhood
    sums touch it.  Columns are the alpha block (lag-major, node-major
    within a lag for node-specific alphas) followed by beta columns in
    (lag, stage) order.  Returns (design, response, row_index) where
    row_index lists (node, column) pairs into the panel.
    """
    order = spec.order
    _validate_stages(order, stages, panel.labels)
    n, T = panel.n_nodes, panel.n_times
    p = order.p
    if T <= p:
        raise InsufficientDataError(f"panel length {T} <= lag order {p}")
    X = panel.values

    # Neighbourhood sums per (lag, stage): matrix product with NaN masking so
    # a missing stage member poisons only rows that actually use it.
    w_mats = {r: weights.matrix(r, n) for r in range(1, order.max_stage + 1)}
    nbr: dict[int, np.ndarray] = {}
    X_filled = np.where(np.isnan(X), 0.0, X)
    nan_mask = np.isnan(X).astype(float)
    for r in w_mats:
        sums = w_mats[r] @ X_filled
        poisoned = ((w_mats[r] != 0).astype(float) @ nan_mask) > 0
        sums[poisoned] = np.nan
        nbr[r] = sums

    M = spec.n_params(n)
    rows_design: list[np.ndarray] = []
    rows_y: list[float] = []
    row_index: list[tuple[int, int]] = []
    n_alpha = p if spec.global_alpha else p * n
    beta_cols: list[tuple[int, int]] = [
        (j, r) for j in range(1, p + 1) for r in range(1, order.s[j - 1] + 1)]

    for t in range(p, T):
        for i in range(n):
            y = X[i, t]
            if math.isnan(y):
                continue
            row = np.zeros(M)
            ok = True
            for j in range(1, p + 1):
                v = X[i, t - j]
                if math.isnan(v):
                    ok = False
                    break
                if spec.global_alpha:
                    row[j - 1] = v
                else:
                    row[(j - 1) * n + i] = v
            if not ok:
                continue
            for c, (j, r) in enumerate(beta_cols):
                z = nbr[r][i, t - j]
                if math.isnan(z):
                    ok = False
                    break
                row[n_alpha + c] = z
            if not ok:
                continue
            rows_design.append(row)
            rows_y.append(y)
            row_index.append((i, t))

    if not rows_design:
        raise InsufficientDataError("no usable stacked rows (too much missing data)")
    return np.asarray(rows_design), np.asarray(rows_y), row_index


# ---------------------------------------------------------------------------
# Estimation
# ---------------------------------------------------------------------------

def _check_rank(design: np.ndarray, names: Sequence[str]) -> None:
    from scipy import linalg

    m = design.shape[1]
    _, r_fac, piv = linalg.qr(design, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r_fac))
    tol = max(design.shape) * np.finfo(float).eps * (diag[0] if diag.size else 0.0)
    rank = int(np.sum(diag > tol))
    if rank < m:
        dep = sorted(names[int(c)] for c in piv[rank:])
        raise SingularDesignError(
            f"design is rank deficient ({rank}/{m}); dependent columns: {dep}")


def _gaussian_criteria(rss: float, n_obs: int, M: int) -> tuple[float, float, float, float]:
    sigma2 = rss / n_obs
    if sigma2 <= 0:
        sigma2 = np.finfo(float).tiny  # exact fit; keep loglik finite
    loglik = -0.5 * n_obs * (math.log(2.0 * math.pi * sigma2) + 1.0)
    bic = M * math.log(n_obs) - 2.0 * loglik
    aic = 2.0 * M - 2.0 * loglik
    return sigma2, loglik, bic, aic


def _unstack_gamma(gamma: np.ndarray, spec: GnarSpec, n: int
                   ) -> tuple[np.ndarray, tuple[np.ndarray, ...]]:
    p = spec.order.p
    if spec.global_alpha:
        alpha = gamma[:p].copy()
        off = p
    else:
        alpha = gamma[:p * n].reshape(p, n).T.copy()
        off = p * n
    beta = []
    for sj in spec.order.s:
        beta.append(gamma[off:off + sj].copy())
        off += sj
    return alpha, tuple(beta)


def _residual_panel(shape: tuple[int, int], row_index, resid: np.ndarray) -> np.ndarray:
    out = np.full(shape, np.nan)
    for (i, t), e in zip(row_index, resid):
        out[i, t] = e
    return out


def fit_ols(design: np.ndarray, response: np.ndarray, spec: GnarSpec,
            n: int, T: int,
            row_index: Optional[list[tuple[int, int]]] = None,
            labels: Optional[Sequence[str]] = None,
            weight_set: Optional[WeightSet] = None) -> GnarFit:
    """Restricted least squares under a spherical error covariance.

    With errors i.i.d. across nodes and time, generalised least squares on
    the restricted parametrisation reduces to ordinary least squares on the
    stacked design.  The design must have full column rank.
    """
    design = np.asarray(design, dtype=float)
    response = np.asarray(response, dtype=float).ravel()
    if design.ndim != 2 or design.shape[0] != response.size:
        raise InvalidInputError("design and response shapes do not match")
    n_obs, M = design.shape
    if M != spec.n_params(n):
        raise InvalidInputError(
            f"design has {M} columns but spec implies {spec.n_params(n)}")
    if n_obs < M:
        raise InsufficientDataError(f"{n_obs} rows < {M} parameters")
    labels = tuple(labels) if labels is not None else tuple(f"v{i}" for i in range(n))
    names = coefficient_names(spec, labels)
    _check_rank(design, names)

    gamma, _, _, _ = np.linalg.lstsq(design, response, rcond=None)
    resid = response - design @ gamma
    rss = float(resid @ resid)
    sigma2, loglik, bic, aic = _gaussian_criteria(rss, n_obs, M)
    xtx_inv = np.linalg.inv(design.T @ design)
    gamma_se = np.sqrt(np.maximum(np.diag(xtx_inv) * sigma2, 0.0))
    alpha, beta = _unstack_gamma(gamma, spec, n)
    residuals = (_residual_panel((n, T), row_index, resid)
                 if row_index is not None else None)
    return GnarFit(
        spec=spec, labels=labels, gamma=gamma, gamma_se=gamma_se,
        column_names=names, alpha=alpha, beta=beta, sigma2=sigma2,
        residuals=residuals, n_obs=n_obs, M=M, loglik=loglik, bic=bic,
        aic=aic, weight_set=weight_set,
    )


def estimate_sigma(panel: TimeSeriesPanel, p: int) -> np.ndarray:
    """Residual covariance from an unconstrained VAR(p) least-squares fit.

    Uses only time points whose response and full lag window are observed
    at every node.  Requires at least N*p such columns, otherwise the
    unconstrained coefficient matrix is not estimable; in that case fall
    back to a diagonal covariance built from per-node residual variances of
    the restricted fit.
    """
    if p < 1:
        raise InvalidInputError("p must be >= 1")
    X = panel.values
    n, T = X.shape
    obs = ~np.isnan(X)
    usable = [t for t in range(p, T)
              if obs[:, t].all() and all(obs[:, t - j].all() for j in range(1, p + 1))]
    if len(usable) < n * p:
        raise FeasibilityError(
            f"{len(usable)} complete columns < N*p = {n * p}; the full covariance "
            "is not estimable -- use a diagonal fallback from per-node residual "
            "variances of the restricted fit")
    Xt = np.column_stack([X[:, t] for t in usable])          # N x T'
    Z = np.vstack([np.column_stack([X[:, t - j] for t in usable])
                   for j in range(1, p + 1)])                # pN x T'
    B_hat = np.linalg.lstsq(Z.T, Xt.T, rcond=None)[0].T       # N x pN
    resid = Xt - B_hat @ Z
    return (resid @ resid.T) / len(usable)


def fit_egls(design: np.ndarray, response: np.ndarray, spec: GnarSpec,
             n: int, T: int, sigma: np.ndarray,
             row_index: list[tuple[int, int]],
             labels: Optional[Sequence[str]] = None,
             weight_set: Optional[WeightSet] = None) -> GnarFit:
    """Estimated generalised least squares with covariance ``sigma``.

    Rows are grouped by time point and whitened with the Cholesky factor of
    the covariance restricted to that time's present nodes, then solved by
    least squares; with sigma proportional to the identity this coincides
    with :func:`fit_ols`.  Residuals and criteria are reported on the
    original (unwhitened) scale under the pooled-variance convention, so
    criteria stay comparable with OLS fits.
    """
    design = np.asarray(design, dtype=float)
    response = np.asarray(response, dtype=float).ravel()
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (n, n):
        raise InvalidInputError(f"sigma shape {sigma.shape} does not match n={n}")
    if row_index is None or len(row_index) != design.shape[0]:
        raise InvalidInputError("fit_egls needs a row_index aligned with the design")
    labels = tuple(labels) if labels is not None else tuple(f"v{i}" for i in range(n))
    names = coefficient_names(spec, labels)
    _check_rank(design, names)

    from scipy.linalg import solve_triangular

    by_time: dict[int, list[int]] = {}
    for pos, (_, t) in enumerate(row_index):
        by_time.setdefault(t, []).append(pos)

    wd_rows, wy_rows = [], []
    for t, positions in sorted(by_time.items()):
        nodes = [row_index[pos][0] for pos in positions]
        sub = sigma[np.ix_(nodes, nodes)]
        try:
            L = np.linalg.cholesky(sub)
        except np.linalg.LinAlgError as exc:
            raise InvalidInputError(
                "sigma is not positive definite; regularise it (e.g. keep only "
                "the diagonal) before EGLS") from exc
        wd_rows.append(solve_triangular(L, design[positions], lower=True))
        wy_rows.append(solve_triangular(L, response[positions], lower=True))
    Dw = np.vstack(wd_rows)
    yw = np.concatenate(wy_rows)
    gamma, _, _, _ = np.linalg.lstsq(Dw, yw, rcond=None)

    resid = response - design @ gamma
    rss = float(resid @ resid)
    n_obs, M = design.shape
    sigma2, loglik, bic, aic = _gaussian_criteria(rss, n_obs, M)
    cov = np.linalg.inv(Dw.T @ Dw)
    gamma_se = np.sqrt(np.maximum(np.diag(cov), 0.0))
    alpha, beta = _unstack_gamma(gamma, spec, n)
    return GnarFit(
        spec=spec, labels=labels, gamma=gamma, gamma_se=gamma_se,
        column_names=names, alpha=alpha, beta=beta, sigma2=sigma2,
        residuals=_residual_panel((n, T), row_index, resid), n_obs=n_obs,
        M=M, loglik=loglik, bic=bic, aic=aic, sigma_full=sigma,
        weight_set=weight_set,
    )


def fit(panel: TimeSeriesPanel, g: Graph, spec: GnarSpec,
        method: str = "ols") -> GnarFit:
    """Convenience wrapper: stages -> weights -> design -> estimate.

    ``method`` is 'ols' or 'egls'; EGLS estimates the full residual
    covariance first and is only feasible when the panel is long enough
    (see :func:`estimate_sigma`).
    """
    if tuple(panel.labels) != tuple(g.labels):
        raise InvalidInputError(
            "panel and graph label order differ; align them before fitting")
    r_max = max(spec.order.max_stage, 1)
    stages = stage_neighbourhoods(g, r_max)
    weights = compute_weights(g, stages, spec.scheme)
    design, response, rows = build_design(panel, spec, weights, stages)
    if method == "ols":
        return fit_ols(design, response, spec, panel.n_nodes, panel.n_times,
                       row_index=rows, labels=panel.labels, weight_set=weights)
    if method == "egls":
        sigma = estimate_sigma(panel, spec.order.p)
        return fit_egls(design, response, spec, panel.n_nodes, panel.n_times,
                        sigma, rows, labels=panel.labels, weight_set=weights)
    raise InvalidInputError(f"unknown method {method!r}; expected 'ols' or 'egls'")


# ---------------------------------------------------------------------------
# Prediction and simulation
# ---------------------------------------------------------------------------

def _alpha_matrix(alpha: np.ndarray, n: int, p: int) -> np.ndarray:
    """Coefficients as (N, p) regardless of the sharing convention."""
    a = np.asarray(alpha, dtype=float)
    if a.shape == (p,):
        return np.tile(a, (n, 1))
    if a.shape == (n, p):
        return a
    raise InvalidInputError(f"alpha shape {a.shape} fits neither (p,) nor (N, p)")


def _one_step(history: np.ndarray, alpha_np: np.ndarray,
              beta: Sequence[np.ndarray], w_mats: dict[int, np.ndarray]) -> np.ndarray:
    """Model prediction for the next time point.

    ``history`` is N x p with column j-1 holding the values at lag j.
    Missing lagged values propagate to the prediction.
    """
    n, p = history.shape
    pred = np.zeros(n)
    for j in range(1, p + 1):
        v = history[:, j - 1]
        pred += alpha_np[:, j - 1] * v
        bj = beta[j - 1]
        if len(bj) == 0:
            continue
        filled = np.where(np.isnan(v), 0.0, v)
        poisoned = np.isnan(v)
        for r in range(1, len(bj) + 1):
            w = w_mats[r]
            z = w @ filled
            z[((w != 0) @ poisoned.astype(float)) > 0] = np.nan
            pred += bj[r - 1] * z
    return pred


def simulate(spec: GnarSpec, alpha: np.ndarray, beta: Sequence[np.ndarray],
             g: Graph, T: int, sigma: float, init_mean: float = 0.0,
             burn_in: int = 0, seed: int = 0,
             start_date: Optional[datetime.date] = None,
             init_values: Optional[np.ndarray] = None) -> TimeSeriesPanel:
    """Simulate a length-T panel from the model on graph ``g``.

    The first p columns are drawn i.i.d. N(init_mean, sigma^2) (or taken
    from ``init_values``, shape (N, p), when given); subsequent columns
    follow the model recursion with i.i.d. N(0, sigma^2) innovations.
    ``burn_in`` extra leading columns are generated and discarded.  Output
    is deterministic given the seed.  ``sigma`` is a standard deviation;
    sigma=0 gives the deterministic recursion.
    """
    order = spec.order
    p = order.p
    if sigma < 0:
        raise InvalidInputError("sigma must be >= 0")
    if T <= p:
        raise InvalidInputError(f"T={T} must exceed the lag order p={p}")
    n = g.n
    beta = [np.asarray(b, dtype=float) for b in beta]
    if len(beta) != p or any(len(b) != sj for b, sj in zip(beta, order.s)):
        raise InvalidInputError("beta shapes do not match the order's stage counts")
    alpha_np = _alpha_matrix(alpha, n, p)

    r_max = max(order.max_stage, 1)
    stages = stage_neighbourhoods(g, r_max)
    _validate_stages(order, stages, g.labels)
    weights = compute_weights(g, stages, spec.scheme)
    w_mats = {r: weights.matrix(r, n) for r in range(1, order.max_stage + 1)}

    rng = np.random.default_rng(seed)
    total = T + burn_in
    X = np.empty((n, total))
    if init_values is not None:
        init = np.asarray(init_values, dtype=float)
        if init.shape != (n, p):
            raise InvalidInputError(f"init_values shape {init.shape} != ({n}, {p})")
        X[:, :p] = init
    else:
        X[:, :p] = rng.normal(init_mean, sigma, size=(n, p))
    for t in range(p, total):
        window = X[:, [t - j for j in range(1, p + 1)]]
        mean = _one_step(window, alpha_np, beta, w_mats)
        X[:, t] = mean + (rng.normal(0.0, sigma, size=n) if sigma > 0 else 0.0)

    X = X[:, burn_in:]
    if start_date is None:
        start_date = datetime.date(2000, 1, 3)
    dates = tuple(start_date + datetime.timedelta(days=7 * k) for k in range(T))
    return TimeSeriesPanel(labels=g.labels, dates=dates, values=X)


def forecast(fit: GnarFit, panel: TimeSeriesPanel, horizon: int,
             mode: str = "rolling_one_step") -> np.ndarray:
    """Predict ``horizon`` weeks with a fitted model.

    rolling_one_step predicts each of the last ``horizon`` columns of
    ``panel`` from the true observed history before it (the per-week
    evaluation convention).  recursive predicts ``horizon`` new columns
    after the end of ``panel``, feeding its own predictions forward.  Both
    agree at horizon 1 when the rolling panel extends the recursive one by
    the single evaluated column.  Returns an N x horizon array; predictions
    with missing operands are NaN.
    """
    if horizon < 1:
        raise InvalidInputError("horizon must be >= 1")
    if tuple(panel.labels) != tuple(fit.labels):
        raise InvalidInputError("panel labels do not match the fitted model")
    if fit.weight_set is None:
        raise InvalidInputError("fit carries no weights; refit via fit()/fit_ols "
                                "with weight_set to enable forecasting")
    order = fit.spec.order
    p = order.p
    n = panel.n_nodes
    alpha_np = _alpha_matrix(fit.alpha, n, p)
    w_mats = {r: fit.weight_set.matrix(r, n) for r in range(1, order.max_stage + 1)}
    X = panel.values

    if mode == "rolling_one_step":
        if panel.n_times < p + horizon:
            raise InvalidInputError(
                f"panel has {panel.n_times} columns; need >= p + horizon = {p + horizon}")
        preds = np.empty((n, horizon))
        for h in range(horizon):
            t = panel.n_times - horizon + h
            window = X[:, [t - j for j in range(1, p + 1)]]
            preds[:, h] = _one_step(window, alpha_np, fit.beta, w_mats)
        return preds
    if mode == "recursive":
        if panel.n_times < p:
            raise InvalidInputError(f"panel shorter than lag order {p}")
        extended = np.concatenate([X, np.empty((n, horizon))], axis=1)
        for h in range(horizon):
            t = panel.n_times + h
            window = extended[:, [t - j for j in range(1, p + 1)]]
            extended[:, t] = _one_step(window, alpha_np, fit.beta, w_mats)
        return extended[:, panel.n_times:]
    raise InvalidInputError(
        f"unknown mode {mode!r}; expected 'rolling_one_step' or 'recursive'")


def stationarity_margin(alpha: np.ndarray, beta: Sequence[np.ndarray]) -> float:
    """1 minus the summed coefficient magnitudes; positive is sufficient
    (not necessary) for stationarity.

    Computes 1 - sum_j (max_i |alpha[i, j]| + sum_r |beta[j, r]|).  Callers
    should surface a nonpositive margin as a warning, never a hard error.
    """
    a = np.atleast_2d(np.asarray(alpha, dtype=float))
    total = 0.0
    for j in range(a.shape[-1]):
        total += float(np.max(np.abs(a[..., j])))
        if j < len(beta):
            total += float(np.sum(np.abs(beta[j])))
    return 1.0 - total
