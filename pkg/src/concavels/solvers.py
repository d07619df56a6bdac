"""Estimation procedures for the penalized least-squares objective

    L(b) = ||y - X b||_2^2 / (2n) + sum_j rho(b_j; lam).

Provides Lasso coordinate descent (optionally with per-coordinate
weights), multi-stage convex relaxation (reweighted l1 with weights
rho_dot at the previous iterate), monotone proximal-gradient local
descent, exhaustive small-scale global enumeration (exact for l0,
multistart-certified otherwise), the oracle least squares on a known
support, and the excess / gap functionals that classify a vector as an
approximate local or global solution.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import penalties as pen
from .design import as_design, require_enumerable
from .errors import (
    NotNormalizedError,
    RankDeficientError,
    UnboundedDerivativeError,
)

ZERO_TOL_SCALE = 1e-8


@dataclass
class SolverOptions:
    max_iter: int = 2000
    tol: float = 1e-10              # stationarity: max coordinate update
    zero_tol: float = ZERO_TOL_SCALE  # relative support threshold
    seed: int = 0
    ls_factor: float = 0.5          # backtracking shrink factor
    ls_init: float | None = None    # None -> 1/kappa_+ by power iteration
    min_step: float = 1e-14
    enum_cap: int = 200_000
    record_trace: bool = False


@dataclass
class Solution:
    beta: np.ndarray
    support: tuple
    objective: float
    solver: str
    local_excess: float | None = None
    iterations: int = 0
    certified: str = ""             # "global-l0" | "multistart" | ""
    converged: bool = True
    stage_objectives: list = field(default_factory=list)
    trace: list = field(default_factory=list)

    def to_dict(self):
        return {
            "beta": self.beta.tolist(),
            "support": list(self.support),
            "objective": self.objective,
            "solver": self.solver,
            "local_excess": self.local_excess,
            "iterations": self.iterations,
            "certified": self.certified,
            "converged": self.converged,
        }


def support_of(beta, zero_tol=ZERO_TOL_SCALE):
    """Indices with |beta_j| above the relative zero threshold."""
    beta = np.asarray(beta)
    thr = zero_tol * max(1.0, float(np.max(np.abs(beta), initial=0.0)))
    return tuple(int(j) for j in np.flatnonzero(np.abs(beta) > thr))


def objective_value(X, y, penalty, beta) -> float:
    X = as_design(X).X
    r = y - X @ beta
    return float(r @ r / (2 * X.shape[0]) + pen.rho_sum(penalty, beta))


def _require_normalized(dm):
    if not dm.check_normalized():
        raise NotNormalizedError("solver requires ||x_j||_2 = sqrt(n) columns")


def _finish(X, y, penalty, beta, solver, iterations, opts, certified="",
            converged=True, stages=None, trace=None):
    beta = np.asarray(beta, dtype=float)
    sol = Solution(
        beta=beta,
        support=support_of(beta, opts.zero_tol),
        objective=objective_value(X, y, penalty, beta),
        solver=solver,
        iterations=iterations,
        certified=certified,
        converged=converged,
        stage_objectives=stages or [],
        trace=trace or [],
    )
    try:
        sol.local_excess = local_excess(X, y, penalty, beta)
    except UnboundedDerivativeError:
        sol.local_excess = None
    return sol


def lasso_cd(X, y, lam, opts=None, weights=None):
    """Cyclic coordinate descent for the (weighted) Lasso.

    With unit-norm columns each update is an exact scalar soft-threshold;
    terminates when the largest coordinate change drops below opts.tol.
    weights=None means the plain Lasso at level lam; otherwise weights[j]
    is the l1 level of coordinate j (np.inf freezes a coordinate at 0).
    """
    opts = opts or SolverOptions()
    dm = as_design(X)
    _require_normalized(dm)
    Xa, n, p = dm.X, dm.n, dm.p
    w = np.full(p, float(lam)) if weights is None else np.asarray(weights, dtype=float)
    beta = np.zeros(p)
    r = y.astype(float).copy()
    trace = []
    it = 0
    for it in range(1, opts.max_iter + 1):
        delta = 0.0
        for j in range(p):
            old = beta[j]
            if math.isinf(w[j]):
                continue
            z = old + Xa[:, j] @ r / n
            new = math.copysign(max(abs(z) - w[j], 0.0), z)
            if new != old:
                r += Xa[:, j] * (old - new)
                beta[j] = new
                delta = max(delta, abs(new - old))
        if opts.record_trace:
            trace.append(float(r @ r / (2 * n) + np.sum(w[np.isfinite(w)] * np.abs(beta[np.isfinite(w)]))))
        if delta <= opts.tol:
            break
    penalty = pen.l1(lam)
    return _finish(dm, y, penalty, beta, "lasso_cd", it, opts, trace=trace)


def default_stage_count(beta_stage1, zero_tol=ZERO_TOL_SCALE) -> int:
    k = len(support_of(beta_stage1, zero_tol))
    return int(math.ceil(math.log2(1 + k))) + 2


def multistage(X, y, penalty, stages=None, opts=None, allow_unbounded_weights=False):
    """Multi-stage convex relaxation: reweighted l1 with weights
    rho_dot(|previous beta_j|), starting from beta = 0.

    Requires a finite rho_dot(0+); with allow_unbounded_weights the bridge
    penalty is handled by freezing zero coordinates at zero (the previous
    active-set convention).  The stage count defaults to
    ceil(log2(1 + ||beta^(1)||_0)) + 2.
    """
    opts = opts or SolverOptions()
    dm = as_design(X)
    _require_normalized(dm)
    if not math.isfinite(pen.rho_dot_zero_plus(penalty)) and not allow_unbounded_weights:
        raise UnboundedDerivativeError(
            f"{penalty.family} has rho_dot(0+) = inf; multistage needs the "
            "previous-active-set fallback (allow_unbounded_weights=True)")
    beta = np.zeros(dm.p)
    stage_objs = []
    total_iters = 0
    n_stages = stages
    ell = 0
    while True:
        ell += 1
        a = np.abs(beta)
        w = np.empty(dm.p)
        for j in range(dm.p):
            if a[j] == 0.0:
                w[j] = pen.rho_dot_zero_plus(penalty)
            else:
                w[j] = pen.rho_dot(penalty, a[j], "right")
        sol = lasso_cd(dm, y, penalty.lam, opts=opts, weights=w)
        beta = sol.beta
        total_iters += sol.iterations
        stage_objs.append(objective_value(dm, y, penalty, beta))
        if n_stages is None and ell == 1:
            n_stages = default_stage_count(beta, opts.zero_tol)
        if ell >= (n_stages or 1):
            break
    out = _finish(dm, y, penalty, beta, "multistage", total_iters, opts,
                  stages=stage_objs)
    return out


def _power_step(dm, seed):
    """1 / kappa_+(p) estimate by power iteration on the Gram."""
    G = dm.gram()
    rng = np.random.Generator(np.random.Philox(seed))
    v = rng.standard_normal(dm.p)
    v /= np.linalg.norm(v)
    for _ in range(50):
        v = G @ v
        nv = np.linalg.norm(v)
        if nv == 0:
            return 1.0
        v /= nv
    return 1.0 / max(float(v @ G @ v), 1e-12)


def local_descent(X, y, penalty, init, opts=None):
    """Monotone proximal-gradient descent from init.

    Each step maps beta to prox(beta - s * X'(X beta - y)/n) with the step
    s backtracked until the objective does not increase; terminates when
    the largest coordinate change is below opts.tol.  Requires rho to be
    continuous at 0 (every family except l0).
    """
    opts = opts or SolverOptions()
    dm = as_design(X)
    _require_normalized(dm)
    if penalty.family == pen.L0:
        # rho is discontinuous at 0 but the prox is still exact; descent is
        # monotone all the same, so l0 is allowed with hard thresholding.
        pass
    Xa, n = dm.X, dm.n
    beta = np.asarray(init, dtype=float).copy()
    obj = objective_value(dm, y, penalty, beta)
    s_init = opts.ls_init if opts.ls_init is not None else _power_step(dm, opts.seed)
    s = s_init
    trace = [obj] if opts.record_trace else []
    converged = True
    it = 0
    for it in range(1, opts.max_iter + 1):
        grad = Xa.T @ (Xa @ beta - y) / n
        while True:
            cand = pen.prox(penalty, beta - s * grad, step=s)
            cand_obj = objective_value(dm, y, penalty, cand)
            if cand_obj <= obj + 1e-15 * max(1.0, abs(obj)):
                break
            s *= opts.ls_factor
            if s < opts.min_step:
                converged = False
                break
        if not converged:
            break
        delta = float(np.max(np.abs(cand - beta), initial=0.0))
        beta, obj = cand, cand_obj
        if opts.record_trace:
            trace.append(obj)
        s = min(s / opts.ls_factor, s_init)
        if delta <= opts.tol:
            break
    return _finish(dm, y, penalty, beta, "local_descent", it, opts,
                   converged=converged, trace=trace)


def oracle_lse(X, y, S, opts=None):
    """Least squares restricted to S, zero elsewhere."""
    opts = opts or SolverOptions()
    dm = as_design(X)
    S = sorted(S)
    beta = np.zeros(dm.p)
    if S:
        Xs = dm.X[:, S]
        coef, _, rank, _ = np.linalg.lstsq(Xs, y, rcond=None)
        if rank < len(S):
            raise RankDeficientError("X_S is rank deficient")
        beta[S] = coef
    penalty = pen.l1(1.0)  # objective recorded below uses the LS part only
    sol = Solution(beta=beta, support=support_of(beta, opts.zero_tol),
                   objective=float(np.sum((y - dm.X @ beta) ** 2) / (2 * dm.n)),
                   solver="oracle_lse")
    return sol


def local_excess(X, y, penalty, beta) -> float:
    """nu = || X'(X beta - y)/n + rho_dot(beta) ||_2^2 with the derivative
    chosen most favorably inside its admissible interval per coordinate."""
    dm = as_design(X)
    beta = np.asarray(beta, dtype=float)
    r = dm.X.T @ (dm.X @ beta - y) / dm.n
    lo, hi = pen.rho_dot_interval(penalty, beta)
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    d = np.clip(-r, lo, hi)
    resid = r + d
    resid[~np.isfinite(d)] = 0.0  # infinite interval absorbs the residual
    return float(resid @ resid)


def global_gap(X, y, penalty, beta, reference) -> float:
    """L(beta) - L(reference); beta is a {nu, reference} approximate global
    solution exactly when this is <= nu."""
    return objective_value(X, y, penalty, beta) - objective_value(X, y, penalty, reference)


def kkt_residual(X, y, beta) -> float:
    """||X'(y - X beta)/n||_inf (Lemma-style optimality residual)."""
    dm = as_design(X)
    return float(np.max(np.abs(dm.X.T @ (y - dm.X @ beta) / dm.n), initial=0.0))


def _grouped_supports(p, max_support):
    for k in range(1, max_support + 1):
        idx = np.asarray(list(itertools.combinations(range(p), k)), dtype=int)
        yield k, idx


def _batched_pinv_solve(mats, rhs):
    """Solve sym PSD batch via eigen clip (robust to rank deficiency)."""
    w, v = np.linalg.eigh(mats)
    wmax = np.max(w, axis=-1, keepdims=True)
    winv = np.where(w > 1e-12 * np.maximum(wmax, 1e-300), 1.0 / w, 0.0)
    return np.einsum("...ij,...j,...kj,...k->...i", v, winv, v, rhs)


def _l0_projection_objectives(dm, y, lam):
    """For every support: ||y - P_A y||^2/(2n) + lam^2 |A| / 2, batched."""
    n, p = dm.n, dm.p
    G = dm.gram()
    xty = dm.X.T @ y / n
    yy = float(y @ y) / (2 * n)
    out = []
    for k, idx in _grouped_supports(p, p):
        sub = G[idx[:, :, None], idx[:, None, :]]
        b = xty[idx]
        coef = _batched_pinv_solve(sub, b)
        fit = 0.5 * np.einsum("ci,ci->c", coef, b)  # ||P_A y||^2/(2n)
        objs = yy - fit + 0.5 * lam * lam * k
        out.append((k, idx, coef, objs))
    return yy, out


def _batched_prox_descent(dm, y, penalty, idx, inits, n_iter, tol):
    """Fixed-step proximal gradient on every support of one size at once.

    idx: (C, k) supports; inits: (C, k) start; step per support is
    1/max-eig of the restricted Gram (monotone for the exact scalar prox).
    """
    G = dm.gram()
    xty = dm.X.T @ y / dm.n
    sub = G[idx[:, :, None], idx[:, None, :]]
    b = xty[idx]
    lips = np.maximum(np.linalg.eigvalsh(sub)[:, -1], 1e-12)
    step = (1.0 / lips)[:, None]
    B = inits.copy()
    for _ in range(n_iter):
        grad = np.einsum("cij,cj->ci", sub, B) - b
        Bn = pen.prox(penalty, B - step * grad, step=step)
        if float(np.max(np.abs(Bn - B), initial=0.0)) <= tol:
            B = Bn
            break
        B = Bn
    return B


def _restricted_objectives(dm, y, penalty, idx, B):
    """Objective of supports idx with coefficient blocks B."""
    n = dm.n
    XB = np.zeros((idx.shape[0], n))
    for c in range(idx.shape[0]):
        XB[c] = dm.X[:, idx[c]] @ B[c]
    r = y[None, :] - XB
    pv = pen.rho(penalty, B).sum(axis=1)
    return np.einsum("ci,ci->c", r, r) / (2 * n) + pv


def global_enumerate(X, y, penalty, max_support=None, opts=None):
    """Global minimizer by support enumeration up to max_support.

    l0: exact (per-support objective is the projection residual plus the
    count penalty).  Other penalties: per-support multistart proximal
    descent (starts: restricted LSE, a batched ISTA lasso warm start, and
    zero), so the result is certified up to multistart and flagged.
    Ties go to the smaller support, then lexicographic order.
    """
    opts = opts or SolverOptions()
    dm = as_design(X)
    _require_normalized(dm)
    p = dm.p
    max_support = p if max_support is None else min(max_support, p)
    require_enumerable(p, max_support, opts.enum_cap)
    zero_obj = objective_value(dm, y, penalty, np.zeros(p))
    best_obj = zero_obj
    best_beta = np.zeros(p)
    best_key = (0, ())

    if penalty.family == pen.L0:
        lam = penalty.lam
        yy, groups = _l0_projection_objectives(dm, y, lam)
        for k, idx, coef, objs in groups:
            if k > max_support:
                break
            order = np.argsort(objs, kind="stable")
            c = int(order[0])
            if objs[c] < best_obj - 1e-15 * max(1.0, abs(best_obj)):
                best_obj = float(objs[c])
                best_beta = np.zeros(p)
                best_beta[idx[c]] = coef[c]
                best_key = (k, tuple(idx[c]))
        sol = _finish(dm, y, penalty, best_beta, "global_enumerate", 0, opts,
                      certified="global-l0")
        return sol

    # general penalty: multistart batched descent, pruned by the LS bound
    n_iter = min(opts.max_iter, 400)
    G = dm.gram()
    xty = dm.X.T @ y / dm.n
    for k, idx in _grouped_supports(p, max_support):
        sub = G[idx[:, :, None], idx[:, None, :]]
        b = xty[idx]
        lse = _batched_pinv_solve(sub, b)
        ls_bound = zero_obj - 0.5 * np.einsum("ci,ci->c", lse, b)
        keep = ls_bound < best_obj - 1e-15
        if not np.any(keep):
            continue
        idx_k, lse_k = idx[keep], lse[keep]
        warm = _batched_prox_descent(dm, y, pen.l1(penalty.lam), idx_k,
                                     np.zeros_like(lse_k), n_iter, opts.tol)
        cands = []
        for init in (lse_k, warm, np.zeros_like(lse_k)):
            Bk = _batched_prox_descent(dm, y, penalty, idx_k, init, n_iter, opts.tol)
            cands.append((Bk, _restricted_objectives(dm, y, penalty, idx_k, Bk)))
        objs = np.stack([o for _, o in cands])
        starts = np.stack([B for B, _ in cands])
        pick = np.argmin(objs, axis=0)
        objs_best = objs[pick, np.arange(idx_k.shape[0])]
        order = np.argsort(objs_best, kind="stable")
        c = int(order[0])
        if objs_best[c] < best_obj - 1e-15 * max(1.0, abs(best_obj)):
            best_obj = float(objs_best[c])
            best_beta = np.zeros(p)
            best_beta[idx_k[c]] = starts[pick[c], c]
            best_key = (k, tuple(idx_k[c]))

    # polish the winner with the full-precision single-support descent
    if best_key[0] > 0:
        refined = local_descent(dm, y, penalty, best_beta, opts=opts)
        if refined.objective <= best_obj + 1e-15:
            best_beta = refined.beta
    sol = _finish(dm, y, penalty, best_beta, "global_enumerate", 0, opts,
                  certified="multistart")
    return sol


def solve_restricted(X, y, penalty, S, opts=None):
    """Multistart minimization restricted to support S (helper)."""
    opts = opts or SolverOptions()
    dm = as_design(X)
    S = sorted(S)
    if not S:
        return _finish(dm, y, penalty, np.zeros(dm.p), "restricted", 0, opts)
    idx = np.asarray([S], dtype=int)
    G = dm.gram()
    xty = dm.X.T @ y / dm.n
    sub = G[idx[:, :, None], idx[:, None, :]]
    lse = _batched_pinv_solve(sub, xty[idx])
    best_beta, best_obj = None, math.inf
    warm = _batched_prox_descent(dm, y, pen.l1(penalty.lam), idx,
                                 np.zeros_like(lse), 400, opts.tol)
    for init in (lse, warm, np.zeros_like(lse)):
        B = _batched_prox_descent(dm, y, penalty, idx, init, 400, opts.tol)
        obj = float(_restricted_objectives(dm, y, penalty, idx, B)[0])
        if obj < best_obj:
            best_obj = obj
            best_beta = np.zeros(dm.p)
            best_beta[S] = B[0]
    return _finish(dm, y, penalty, best_beta, "restricted", 0, opts)
