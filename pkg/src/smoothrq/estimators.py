"""Quantile estimators: smooth quasi-Newton fits, LP fits, and restricted fits.

Three routes to a fitted plane at level tau:

* fit_smooth minimizes the smooth check loss with the quasi-Newton solver.
  The objective is strictly convex and differentiable, so the family of
  solutions moves continuously in tau.
* fit_rq_lp minimizes the classic pinball loss exactly, as the linear
  program  min tau*sum(u) + (1-tau)*sum(v)  s.t.  X(b+ - b-) + u - v = y,
  all variables nonnegative.
* fit_rrq fits one median plane and one median scale plane, then restricts
  every other quantile to the pencil beta_med + c * gamma, choosing the
  scalar c per tau.  All planes share the two fitted directions, which rules
  out crossings whenever the fitted scales are positive.

All estimators expect the Dataset convention of an explicit trailing
intercept column and start smooth fits from the zero vector by default.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .datagen import Dataset
from .diagnostics import GridResult, count_curve
from .losses import SRQ, SMRQ, FlexCheckParams, check_classic, loss_and_grad
from .optim import (
    CONVERGED,
    DEGENERATE_MULTIPLE,
    LPProblem,
    QNConfig,
    SolveReport,
    SolverError,
    minimize_qn,
    minimize_scalar_convex,
    solve_lp_simplex,
)

__all__ = [
    "FIT_GRAD_RTOL",
    "TauGrid",
    "QuantileFit",
    "RRQModel",
    "fit_smooth",
    "fit_rq_lp",
    "fit_rrq",
    "fit_grid",
]

# a fit is accepted when ||grad||_inf <= FIT_GRAD_RTOL * max(1, ||beta||_inf)
FIT_GRAD_RTOL = 1e-6

_SMOOTH_METHODS = {"srq": SRQ, "smrq": SMRQ}
_ALL_METHODS = ("rq", "rrq", "srq", "smrq", "flex")


@dataclass
class TauGrid:
    """Strictly increasing quantile levels inside the open interval (0, 1)."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).ravel()
        if self.values.size == 0:
            raise ValueError("tau grid is empty")
        if not ((self.values > 0.0).all() and (self.values < 1.0).all()):
            raise ValueError("tau values must lie strictly inside (0, 1)")
        if self.values.size > 1 and not (np.diff(self.values) > 0).all():
            raise ValueError("tau values must be strictly increasing")

    def __len__(self):
        return self.values.size

    def __iter__(self):
        return iter(self.values.tolist())

    @classmethod
    def from_count(cls, m: int) -> "TauGrid":
        """m evenly spaced interior levels: tau_i = i / (m + 1), i = 1..m."""
        if m < 1:
            raise ValueError(f"need at least one grid point, got {m}")
        return cls(np.arange(1, m + 1) / float(m + 1))

    @classmethod
    def from_step(cls, start: float, end: float, step: float) -> "TauGrid":
        """Arithmetic grid start, start+step, ..., clipped to the open interval.

        Endpoints landing on 0 or 1 are dropped rather than rejected, so
        (0, 1, 0.01) yields the 99 interior percent levels.
        """
        if not step > 0:
            raise ValueError(f"step must be positive, got {step}")
        if not start < end:
            raise ValueError(f"need start < end, got ({start}, {end})")
        k = int(np.floor((end - start) / step + 1e-9))
        vals = np.round(start + step * np.arange(k + 1), 12)
        vals = vals[(vals > 1e-12) & (vals < 1.0 - 1e-12)]
        if vals.size == 0:
            raise ValueError(f"grid ({start}, {end}, {step}) has no interior points")
        return cls(vals)

    @classmethod
    def coerce(cls, grid) -> "TauGrid":
        if isinstance(grid, cls):
            return grid
        return cls(np.asarray(grid, dtype=float))


@dataclass
class QuantileFit:
    """One fitted plane: level, coefficients, method tag, solver report."""

    tau: float
    beta: np.ndarray
    method: str
    report: SolveReport


@dataclass
class RRQModel:
    """Restricted quantile family: planes beta_med + c[k] * gamma.

    gamma is the median regression of |median residuals| on the predictors;
    c holds one direction step per grid level, with c = 0 pinned at tau = 0.5.
    homoscedastic_degenerate is set when every fitted scale is (numerically)
    zero, in which case all c are forced to 0; negative_scales records
    whether any fitted scale came out below zero.
    """

    taus: np.ndarray
    beta_med: np.ndarray
    gamma: np.ndarray
    c: np.ndarray
    med_report: SolveReport
    scale_report: SolveReport
    homoscedastic_degenerate: bool = False
    negative_scales: bool = False

    def plane(self, k: int) -> np.ndarray:
        return self.beta_med + self.c[k] * self.gamma

    def planes(self) -> np.ndarray:
        return self.beta_med[None, :] + np.outer(self.c, self.gamma)


def _method_tag(params: FlexCheckParams) -> str:
    if params == SRQ:
        return "srq"
    if params == SMRQ:
        return "smrq"
    return "flex"


def fit_smooth(data: Dataset, tau: float, params: FlexCheckParams = SRQ,
               init=None, config: QNConfig | None = None) -> QuantileFit:
    """Minimize the smooth check loss at one level.

    Starts from the zero vector unless init is given.  The result must pass
    the gradient test ||grad||_inf <= 1e-6 * max(1, ||beta||_inf); otherwise
    SolverError carries the diagnostics.
    """
    x0 = np.zeros(data.n_coef) if init is None else np.asarray(init, dtype=float)
    if x0.shape != (data.n_coef,):
        raise ValueError(f"init has shape {x0.shape}, expected ({data.n_coef},)")
    report = minimize_qn(lambda b: loss_and_grad(data, b, tau, params),
                         x0, config or QNConfig())
    tol = FIT_GRAD_RTOL * max(1.0, float(np.abs(report.x).max()))
    if report.status != CONVERGED:
        if report.grad_norm > tol:
            raise SolverError(
                f"smooth fit stalled at tau={tau}: status={report.status}, "
                f"|grad|={report.grad_norm:.3e} > {tol:.3e} after {report.iterations} iterations"
            )
        # the solver missed its own (tighter) tolerance, usually because the
        # objective is flat to float resolution; the fit-level test passed
        report = replace(report, status=CONVERGED,
                         message=f"solver stopped with status {report.status!r} "
                                 f"at |grad|={report.grad_norm:.3e}; "
                                 f"accepted at fit tolerance {tol:.1e}")
    return QuantileFit(tau=float(tau), beta=report.x, method=_method_tag(params),
                       report=report)


def _classic_objective(data: Dataset, beta, tau: float) -> float:
    return float(np.sum(check_classic(data.residuals(beta), tau)))


def _refine_vertex(data: Dataset, beta: np.ndarray, tau: float) -> np.ndarray:
    """Re-solve the fitted plane through the points it interpolates.

    An optimal simplex vertex passes through p data points (up to
    degeneracy).  Solving that p x p system directly removes the rounding
    accumulated across pivots; the candidate is kept only if it does not
    increase the objective.
    """
    p = data.n_coef
    r = data.residuals(beta)
    rows = np.argsort(np.abs(r), kind="stable")[:p]
    if np.any(np.abs(r[rows]) > 1e-6 * (1.0 + np.abs(data.y[rows]))):
        return beta
    try:
        refined = np.linalg.solve(data.X[rows], data.y[rows])
    except np.linalg.LinAlgError:
        return beta
    if not np.isfinite(refined).all():
        return beta
    before = _classic_objective(data, beta, tau)
    after = _classic_objective(data, refined, tau)
    if after <= before * (1.0 + 1e-12) + 1e-12:
        return refined
    return beta


def _best_interval_endpoint(data: Dataset, beta: np.ndarray, tau: float) -> np.ndarray:
    """Resolve an intercept-only tie toward the better-evaluated data point.

    With a single coefficient a degenerate optimum is a closed interval
    between adjacent data values, and the solver may stop anywhere on it
    (the all-residual start basis is already optimal when the interval
    straddles zero).  The whole interval ties in exact arithmetic, but
    float evaluations differ in the last bits, so the fit reports the
    flanking data value whose evaluation is lowest.
    """
    b = float(beta[0])
    cands = []
    if (data.y == b).any():
        cands.append(np.asarray(beta, dtype=float))
    above = data.y[data.y > b]
    below = data.y[data.y < b]
    if above.size:
        cands.append(np.array([float(above.min())]))
    if below.size:
        cands.append(np.array([float(below.max())]))
    if not cands:
        return np.asarray(beta, dtype=float)
    vals = [_classic_objective(data, c, tau) for c in cands]
    return cands[int(np.argmin(vals))]


def fit_rq_lp(data: Dataset, tau: float) -> QuantileFit:
    """Exact pinball-loss fit via the simplex method.

    The reported objective is the pinball loss re-evaluated at the returned
    coefficients.  The status is "degenerate-multiple" when the LP optimum
    admits alternative solutions that actually move the coefficient vector:
    a zero-reduced-cost non-basic residual column, or a (b+, b-) pair both
    non-basic at zero reduced cost.  A zero reduced cost on the mirror of a
    basic coefficient column is ignored; entering it only shifts b+ and b-
    together and leaves their difference unchanged.
    """
    if not 0.0 < float(tau) < 1.0:
        raise ValueError(f"tau must lie strictly inside (0, 1), got {tau}")
    tau = float(tau)
    n, p = data.X.shape
    eye = np.eye(n)
    problem = LPProblem(
        c=np.concatenate([np.zeros(2 * p), np.full(n, tau), np.full(n, 1.0 - tau)]),
        A=np.hstack([data.X, -data.X, eye, -eye]),
        b=data.y,
    )
    lp = solve_lp_simplex(problem)
    if lp.x is None:
        raise SolverError(f"quantile LP failed at tau={tau}: {lp.status} ({lp.message})")
    beta = lp.x[:p] - lp.x[p:2 * p]
    beta = _refine_vertex(data, beta, tau)

    zero_rc = set(lp.zero_rc_columns)
    genuine = any(j >= 2 * p for j in zero_rc) or any(
        k in zero_rc and k + p in zero_rc for k in range(p)
    )
    status = DEGENERATE_MULTIPLE if genuine else CONVERGED
    if genuine and p == 1:
        beta = _best_interval_endpoint(data, beta, tau)
    report = SolveReport(
        x=beta,
        fun=_classic_objective(data, beta, tau),
        iterations=lp.iterations,
        status=status,
        zero_rc_columns=lp.zero_rc_columns,
        basis=lp.basis,
    )
    return QuantileFit(tau=tau, beta=beta, method="rq", report=report)


def _direction_step_exact(r: np.ndarray, s: np.ndarray, tau: float) -> float:
    """Minimize sum of pinball losses of r - c*s over c, all s nonzero.

    The objective is piecewise linear in c with breakpoints r_i / s_i, so the
    minimum is attained at a breakpoint; 0 is probed as well.  When several
    candidates tie (a flat valley), the point of smallest absolute value in
    the flat interval is returned, which pins c to 0 whenever 0 is optimal.
    """
    cands = np.unique(np.concatenate([r / s, [0.0]]))
    u = r[None, :] - cands[:, None] * s[None, :]
    g = np.where(u >= 0, tau * u, (tau - 1.0) * u).sum(axis=1)
    gmin = float(g.min())
    flat = cands[g <= gmin + 1e-10 * (1.0 + abs(gmin))]
    lo, hi = float(flat[0]), float(flat[-1])
    return min(max(0.0, lo), hi)


def fit_rrq(data: Dataset, tau_grid) -> RRQModel:
    """Median plane, median scale plane, and one direction step per level.

    Step 1 fits the median by LP; step 2 median-regresses the absolute
    residuals on the same predictors to get gamma; step 3 picks each c as the
    exact piecewise-linear minimizer when every fitted scale is nonzero and
    falls back to golden-section search otherwise.  If all scales vanish the
    family collapses to the median plane (c = 0 everywhere) and the
    homoscedastic_degenerate flag is raised.
    """
    grid = TauGrid.coerce(tau_grid)
    med = fit_rq_lp(data, 0.5)
    r = data.residuals(med.beta)
    scale_data = Dataset(X=data.X.copy(), y=np.abs(r),
                         column_names=data.column_names,
                         response_name="abs_residual")
    scale = fit_rq_lp(scale_data, 0.5)
    gamma = scale.beta
    s = data.X @ gamma

    smax = float(np.abs(s).max())
    degenerate = smax <= 1e-12 * max(1.0, float(np.abs(r).max()))
    exact = not degenerate and bool((np.abs(s) > 0.0).all())
    bracket = 10.0 * float(np.abs(r).max()) / max(smax, 1e-12)

    c = np.zeros(len(grid))
    for k, tau in enumerate(grid):
        if degenerate or tau == 0.5:
            continue  # c stays 0: collapsed family, or the median anchor itself
        if exact:
            c[k] = _direction_step_exact(r, s, tau)
        else:
            def g(step, _tau=tau):
                return float(np.sum(check_classic(r - step * s, _tau)))
            c[k] = minimize_scalar_convex(g, (-bracket, bracket))

    return RRQModel(
        taus=grid.values.copy(),
        beta_med=med.beta,
        gamma=gamma,
        c=c,
        med_report=med.report,
        scale_report=scale.report,
        homoscedastic_degenerate=degenerate,
        negative_scales=bool((s < 0).any()),
    )


def fit_grid(data: Dataset, tau_grid, method: str,
             params: FlexCheckParams | None = None,
             warm_start: bool = False) -> GridResult:
    """Fit one method across a tau grid and attach the count curve.

    Grid entries are fitted in increasing tau order.  warm_start seeds each
    smooth fit with the previous level's coefficients (LP and RRQ fits ignore
    it).  A level whose solver fails is recorded in statuses and left as a
    NaN coefficient row; the remaining levels still run.  The count curve is
    attached only when every level produced coefficients.
    """
    grid = TauGrid.coerce(tau_grid)
    if method not in _ALL_METHODS:
        raise ValueError(f"unknown method {method!r}, expected one of {_ALL_METHODS}")
    m, p = len(grid), data.n_coef
    coefs = np.full((m, p), np.nan)
    statuses: list[str] = []

    if method == "rrq":
        model = fit_rrq(data, grid)
        coefs = model.planes()
        note = ""
        if model.homoscedastic_degenerate:
            note = "; homoscedastic-degenerate, family collapsed to the median plane"
        elif model.negative_scales:
            note = "; some fitted scales are negative"
        statuses = [model.med_report.status + note] * m
    elif method == "rq":
        for k, tau in enumerate(grid):
            fit = fit_rq_lp(data, tau)
            coefs[k] = fit.beta
            statuses.append(fit.report.status)
    else:
        if method == "flex":
            if params is None:
                raise ValueError("method 'flex' needs explicit FlexCheckParams")
        else:
            params = _SMOOTH_METHODS[method]
        prev = None
        for k, tau in enumerate(grid):
            init = prev if warm_start else None
            try:
                fit = fit_smooth(data, tau, params=params, init=init)
            except SolverError as exc:
                statuses.append(f"failed: {exc}")
                continue
            coefs[k] = fit.beta
            statuses.append(fit.report.status)
            prev = fit.beta

    result = GridResult(taus=grid.values.copy(), coefficients=coefs,
                        dataset=data, method=method, statuses=statuses)
    if np.isfinite(coefs).all():
        result.curve = count_curve(data, result)
    return result
