"""Deterministic solvers: quasi-Newton descent, golden-section, dense simplex.

Nothing in this module knows about quantiles.  It provides three generic
primitives with reproducible behavior:

* minimize_qn: BFGS-style minimizer for smooth convex objectives, with an
  Armijo backtracking line search and a curvature guard on the inverse-Hessian
  update.  Identical inputs produce bit-identical outputs.
* minimize_scalar_convex: derivative-free golden-section search for scalar
  convex functions, with a documented tie-break for flat minima.
* solve_lp_simplex: two-phase primal simplex on a dense tableau using Bland's
  anti-cycling rule, reporting optimum multiplicity when a non-basic column
  has zero reduced cost.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg.blas import dger

__all__ = [
    "SolverError",
    "QNConfig",
    "LPProblem",
    "SolveReport",
    "CONVERGED",
    "ITERATION_CAP",
    "UNBOUNDED",
    "INFEASIBLE",
    "DEGENERATE_MULTIPLE",
    "minimize_qn",
    "minimize_scalar_convex",
    "solve_lp_simplex",
]

CONVERGED = "converged"
ITERATION_CAP = "iteration-cap"
UNBOUNDED = "unbounded"
INFEASIBLE = "infeasible"
DEGENERATE_MULTIPLE = "degenerate-multiple"

# curvature threshold below which the BFGS update is skipped
_CURVATURE_FLOOR = 1e-12
# smallest Armijo step before the line search is declared stalled
_ALPHA_FLOOR = 1e-20
# absolute noise allowance in the Armijo comparison: once true decreases fall
# below float resolution of f, an exact test rejects or accepts at random and
# the search churns; this lets resolution-limited steps (a few ulps of f)
# through while still rejecting genuine backward moves (the gradient test
# still decides convergence, and gradients carry full relative precision)
_F_NOISE = 1e-15
# consecutive accepted steps with no decrease beyond the noise allowance before
# the inverse-Hessian approximation is presumed poisoned and reset
_STALL_LIMIT = 8


class SolverError(RuntimeError):
    """Raised when a solver cannot produce a usable answer."""


@dataclass(frozen=True)
class QNConfig:
    """Quasi-Newton settings.

    Convergence is declared when ||grad||_inf <= grad_tol * max(1, ||x||_inf).
    """

    grad_tol: float = 1e-8
    max_iter: int = 500
    armijo_c: float = 1e-4
    backtrack: float = 0.5

    def __post_init__(self):
        if not self.grad_tol > 0:
            raise ValueError(f"grad_tol must be positive, got {self.grad_tol}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be at least 1, got {self.max_iter}")
        if not 0.0 < self.armijo_c < 1.0:
            raise ValueError(f"armijo_c must lie in (0, 1), got {self.armijo_c}")
        if not 0.0 < self.backtrack < 1.0:
            raise ValueError(f"backtrack must lie in (0, 1), got {self.backtrack}")


@dataclass(frozen=True)
class LPProblem:
    """Equality-form linear program: minimize c @ x subject to A x = b, x >= 0."""

    c: np.ndarray
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "c", np.asarray(self.c, dtype=float).ravel())
        object.__setattr__(self, "A", np.atleast_2d(np.asarray(self.A, dtype=float)))
        object.__setattr__(self, "b", np.asarray(self.b, dtype=float).ravel())
        m, n = self.A.shape
        if self.c.shape[0] != n:
            raise ValueError(f"c has {self.c.shape[0]} entries for {n} columns")
        if self.b.shape[0] != m:
            raise ValueError(f"b has {self.b.shape[0]} entries for {m} rows")
        for name, arr in (("c", self.c), ("A", self.A), ("b", self.b)):
            if not np.isfinite(arr).all():
                raise ValueError(f"LP component {name} contains non-finite values")


@dataclass
class SolveReport:
    """Outcome of a solver run.

    x is None when no solution vector exists (infeasible/unbounded LPs).
    grad_norm is filled by minimize_qn; zero_rc_columns and basis by the LP
    solver (indices of non-basic columns with zero reduced cost at optimum,
    and the final basis).
    """

    x: np.ndarray | None
    fun: float | None
    iterations: int
    status: str
    message: str = ""
    grad_norm: float | None = None
    zero_rc_columns: tuple[int, ...] = ()
    basis: tuple[int, ...] = ()


def minimize_qn(fun_and_grad, x0, config: QNConfig | None = None) -> SolveReport:
    """Minimize a smooth function given a callable returning (value, gradient).

    BFGS inverse-Hessian updates with the usual guards: the update is skipped
    when the curvature s'y falls below 1e-12, the approximation is rescaled
    once after the first accepted step, and it is reset to the identity if it
    ever stops producing descent directions or if the objective stagnates
    over several accepted steps.  The line search accepts on the Armijo
    sufficient-decrease test only, with two numerical accommodations: an
    absolute float-noise allowance in the comparison, and forward step growth
    when the unit step decreased the objective exactly linearly (see the
    inline comments).  A non-finite objective at the current iterate aborts
    with SolverError; non-finite trial points are simply rejected by the
    line search.  Everything is deterministic.
    """
    cfg = config or QNConfig()
    x = np.array(x0, dtype=float).ravel()
    f, g = fun_and_grad(x)
    f = float(f)
    g = np.asarray(g, dtype=float).ravel()
    if not np.isfinite(f) or not np.isfinite(g).all():
        raise SolverError(f"objective non-finite at the starting point (f={f})")

    p = x.shape[0]
    H = np.eye(p)
    scaled = False
    status = ITERATION_CAP
    message = ""
    it = 0
    stalled = 0
    best_gnorm = float(np.abs(g).max()) if p else 0.0
    for it in range(cfg.max_iter + 1):
        gnorm = float(np.abs(g).max()) if p else 0.0
        if gnorm <= cfg.grad_tol * max(1.0, float(np.abs(x).max()) if p else 0.0):
            status = CONVERGED
            break
        if it == cfg.max_iter:
            break
        d = -(H @ g)
        gd = float(g @ d)
        if gd >= 0.0:
            # numerical loss of positive definiteness; restart from steepest descent
            H = np.eye(p)
            d = -g
            gd = -float(g @ g)

        alpha = 1.0
        accepted = False
        f_new = f
        noise = _F_NOISE * (1.0 + abs(f))
        while alpha >= _ALPHA_FLOOR:
            x_new = x + alpha * d
            f_new, g_new = fun_and_grad(x_new)
            f_new = float(f_new)
            if f_new <= f + cfg.armijo_c * alpha * gd + noise:
                accepted = True
                break
            alpha *= cfg.backtrack
        if not accepted:
            if not np.isfinite(f_new):
                raise SolverError(
                    f"objective became non-finite during line search at iteration {it}"
                )
            message = "line search stalled"
            break

        # Forward extension: when the unit step decreased the objective exactly
        # linearly (a convex tail that is flat to float resolution, e.g. a
        # saturated log-cosh at extreme tau), plain backtracking advances a
        # fixed distance per iteration no matter how far away the minimum is.
        # Growing the step while the Armijo test keeps passing crosses such
        # tails in logarithmically many evaluations; acceptance is still
        # decided by the Armijo condition alone.
        if alpha == 1.0 and abs(f_new - (f + gd)) <= 1e-9 * (1.0 + abs(f)):
            while alpha < 1e12:
                alpha_try = alpha / cfg.backtrack
                x_try = x + alpha_try * d
                f_try, g_try = fun_and_grad(x_try)
                f_try = float(f_try)
                if not np.isfinite(f_try) or f_try > f + cfg.armijo_c * alpha_try * gd:
                    break
                alpha, x_new, f_new, g_new = alpha_try, x_try, f_try, g_try

        g_new = np.asarray(g_new, dtype=float).ravel()
        if not np.isfinite(g_new).all():
            raise SolverError(f"gradient became non-finite at iteration {it}")

        # Stagnation guard: the noise allowance above means steps can be
        # accepted without any real decrease.  Progress is either an objective
        # decrease beyond the noise, or a new low for the gradient norm (near
        # the optimum the objective freezes at float resolution while the
        # gradient still shrinks).  A run of steps without either states the
        # inverse-Hessian approximation has gone bad; rebuilding it from the
        # identity (with a fresh rescale) recovers.  The iteration cap remains
        # the only terminator, so a hopeless instance still ends honestly.
        gnorm_new = float(np.abs(g_new).max()) if p else 0.0
        if f - f_new > noise or gnorm_new < best_gnorm:
            stalled = 0
            best_gnorm = min(best_gnorm, gnorm_new)
        else:
            stalled += 1
            if stalled >= _STALL_LIMIT:
                H = np.eye(p)
                scaled = False
                stalled = 0
                x, f, g = x_new, f_new, g_new
                continue

        s = x_new - x
        yv = g_new - g
        sy = float(s @ yv)
        # the guard is absolute at ordinary scales and switches to a cosine
        # test for the tiny endgame steps whose s'y is small only because the
        # vectors are short; without that the approximation can never improve
        # near a minimizer the line search approaches in sub-1e-6 steps
        sy_floor = _CURVATURE_FLOOR * min(
            1.0, float(np.linalg.norm(s)) * float(np.linalg.norm(yv)))
        if sy > sy_floor:
            if not scaled:
                H *= sy / float(yv @ yv)
                scaled = True
            Hy = H @ yv
            rho = 1.0 / sy
            H -= rho * (np.outer(s, Hy) + np.outer(Hy, s))
            H += (rho * rho * float(yv @ Hy) + rho) * np.outer(s, s)
        x, f, g = x_new, f_new, g_new

    return SolveReport(x=x, fun=f, iterations=it, status=status, message=message,
                       grad_norm=float(np.abs(g).max()) if p else 0.0)


def minimize_scalar_convex(f, bracket) -> float:
    """Golden-section minimum of a scalar convex function on a bracket.

    The interval is shrunk to width 1e-9 * max(1, |a|, |b|).  The returned
    point is chosen among the final interval endpoints, its midpoint, and 0
    (when 0 lies inside the bracket): of those whose value ties the best one
    within a 1e-10 relative margin, the point of smallest absolute value wins.
    For strictly convex functions this is just the interval midpoint; for
    piecewise-linear objectives whose minimum is a flat segment it means a
    zero that attains the minimum is returned exactly.
    """
    a0, b0 = float(bracket[0]), float(bracket[1])
    if not (np.isfinite(a0) and np.isfinite(b0)):
        raise ValueError(f"bracket must be finite, got {bracket}")
    if a0 > b0:
        a0, b0 = b0, a0
    if a0 == b0:
        return a0
    tol = 1e-9 * max(1.0, abs(a0), abs(b0))
    invphi = (np.sqrt(5.0) - 1.0) / 2.0

    a, b = a0, b0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)

    mid = 0.5 * (a + b)
    candidates = [(mid, f(mid)), (a, f(a)), (b, f(b))]
    if a0 <= 0.0 <= b0:
        candidates.append((0.0, f(0.0)))
    best = min(fx for _, fx in candidates)
    margin = 1e-10 * (1.0 + abs(best))
    flat = [x for x, fx in candidates if fx <= best + margin]
    return min(flat, key=abs)


def _pivot_until_optimal(T, z, basis, allowed, cost_scale, cap, it):
    """Run Bland-rule pivots in place until optimality, unboundedness, or cap.

    T is the (m, k+1) tableau with the rhs in the last column, z the reduced
    cost row over the k structural columns, basis the basic column index per
    row, allowed a mask of columns permitted to enter.
    """
    m = T.shape[0]
    assert T.flags.f_contiguous  # dger updates in place only on Fortran order
    enter_tol = 1e-9 * cost_scale
    fac = np.empty(m)
    row = np.empty(T.shape[1])
    ratios = np.empty(m)
    while it < cap:
        eligible = np.nonzero((z < -enter_tol) & allowed)[0]
        if eligible.size == 0:
            return it, "optimal"
        q = int(eligible[0])  # Bland: lowest eligible index enters
        col = T[:, q]
        pos = col > 1e-10
        if not pos.any():
            return it, UNBOUNDED
        ratios.fill(np.inf)
        ratios[pos] = T[pos, -1] / col[pos]
        rmin = ratios.min()
        ties = np.nonzero(ratios <= rmin + 1e-12 * (1.0 + abs(rmin)))[0]
        r = int(ties[np.argmin(basis[ties])])  # Bland: lowest basic index leaves
        T[r] /= T[r, q]
        fac[:] = T[:, q]
        fac[r] = 0.0
        row[:] = T[r]
        dger(-1.0, fac, row, a=T, overwrite_a=1)
        z -= z[q] * row[:-1]
        z[q] = 0.0
        basis[r] = q
        # sweep out rounding drift so the ratio test stays valid
        rhs = T[:, -1]
        rhs[(rhs < 0.0) & (rhs > -1e-9)] = 0.0
        it += 1
    return it, ITERATION_CAP


def solve_lp_simplex(problem: LPProblem, max_iter: int | None = None) -> SolveReport:
    """Solve an equality-form LP by the primal simplex method with Bland's rule.

    Phase 1 introduces artificial variables only for rows lacking a unit
    column, so problems that ship their own slack-like structure start
    feasible immediately.  At the optimum, any non-basic column with zero
    reduced cost marks alternative optima and flips the status to
    "degenerate-multiple"; the indices are reported in zero_rc_columns.
    """
    A = problem.A.copy()
    b = problem.b.copy()
    c = problem.c
    m, n = A.shape
    neg = b < 0
    A[neg] *= -1.0
    b[neg] *= -1.0
    cost_scale = max(1.0, float(np.abs(c).max()) if n else 1.0)
    cap = max_iter if max_iter is not None else 200 + 50 * (m + n)

    # claim unit columns for the starting basis where available
    basis = np.full(m, -1, dtype=int)
    for j in range(n):
        col = A[:, j]
        nz = np.nonzero(col)[0]
        if nz.size == 1 and col[nz[0]] == 1.0 and basis[nz[0]] < 0:
            basis[nz[0]] = j
    missing = np.nonzero(basis < 0)[0]
    it = 0

    if missing.size:
        n_art = missing.size
        T = np.asfortranarray(np.hstack([A, np.zeros((m, n_art)), b[:, None]]))
        for k, i in enumerate(missing):
            T[i, n + k] = 1.0
            basis[i] = n + k
        c1 = np.concatenate([np.zeros(n), np.ones(n_art)])
        z1 = c1 - c1[basis] @ T[:, :-1]
        allowed = np.ones(n + n_art, dtype=bool)
        allowed[n:] = False  # artificials may leave but never re-enter
        it, outcome = _pivot_until_optimal(T, z1, basis, allowed, 1.0, cap, it)
        if outcome == ITERATION_CAP:
            return SolveReport(None, None, it, ITERATION_CAP, "phase 1 hit the pivot cap")
        phase1 = float(np.sum(T[basis >= n, -1]))
        if phase1 > 1e-8 * (1.0 + float(np.abs(b).sum())):
            return SolveReport(None, None, it, INFEASIBLE,
                               f"phase 1 optimum {phase1:.3e} > 0")
        # pivot surviving artificials out; a row they cannot leave is redundant
        drop_rows = []
        for i in range(m):
            if basis[i] >= n:
                row = T[i, :n]
                cand = np.nonzero(np.abs(row) > 1e-9)[0]
                if cand.size == 0:
                    drop_rows.append(i)
                    continue
                q = int(cand[0])
                T[i] /= T[i, q]
                fac = T[:, q].copy()
                fac[i] = 0.0
                T -= np.multiply.outer(fac, T[i])
                basis[i] = q
        if drop_rows:
            keep = np.setdiff1d(np.arange(T.shape[0]), drop_rows)
            T = T[keep]
            basis = basis[keep]
        T = np.asfortranarray(np.hstack([T[:, :n], T[:, -1:]]))
    else:
        T = np.asfortranarray(np.hstack([A, b[:, None]]))

    z = c - c[basis] @ T[:, :-1]
    allowed = np.ones(n, dtype=bool)
    it, outcome = _pivot_until_optimal(T, z, basis, allowed, cost_scale, cap, it)
    if outcome == UNBOUNDED:
        return SolveReport(None, None, it, UNBOUNDED, "objective decreases without bound")
    if outcome == ITERATION_CAP:
        return SolveReport(None, None, it, ITERATION_CAP, "pivot cap reached")

    x = np.zeros(n)
    x[basis] = T[:, -1]
    objective = float(c @ x)
    z_final = c - c[basis] @ T[:, :-1]
    nonbasic = np.setdiff1d(np.arange(n), basis)
    zero_rc = tuple(int(j) for j in nonbasic if abs(z_final[j]) <= 1e-9 * cost_scale)
    status = DEGENERATE_MULTIPLE if zero_rc else CONVERGED
    return SolveReport(x=x, fun=objective, iterations=it, status=status,
                       zero_rc_columns=zero_rc, basis=tuple(int(j) for j in basis))
