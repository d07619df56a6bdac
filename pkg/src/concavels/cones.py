"""Cone-restricted minimization engines behind the design diagnostics.

Everything here works on the normalized Gram G = X'X/n and a support S.
Quantities estimated (infima over the cone ||u_{S^c}||_1 < xi ||u_S||_1,
closed for the minimization; the objectives are continuous so the infimum
is unchanged):

    RE2   = inf sqrt(u'Gu) / ||u||_2
    RE1   = inf sqrt(|S| u'Gu) / ||u_S||_1
    CIF_q = inf |S|^{1/q} ||Gu||_inf / ||u||_q
    RIF_q = same objective over the penalty cone
            ||rho(u_{S^c})||_1 < xi ||rho(u_S)||_1

Two modes:

* oracle (p <= ORACLE_P_MAX): exhaustive face enumeration.  RE1/RE2 are
  exact (per-face eigen / KKT solves over every support x sign-orthant x
  cone-active combination); CIF_1 is exact (one LP per sign-orthant).
  CIF_q for q > 1 has no finite exact algorithm (the per-orthant
  subproblem is still nonconvex), so the oracle builds an exhaustive
  candidate pool (LP/eigen minimizers, structured patterns, samples) and
  polishes with orthant-restricted SLSQP; mode is reported as
  "oracle-polished".
* sampled: vectorized random cone samples plus coordinate-descent
  polish; returns the minimum found.

Every estimate is an upper bound on the true infimum (the value of some
feasible point), which is the conservative direction when the value sits
in the denominator of a theorem bound.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog, minimize

from . import penalties as pen

ORACLE_P_MAX = 10
_FEAS_TOL = 1e-9


@dataclass
class ConeEstimate:
    value: float
    minimizer: np.ndarray | None
    mode: str  # "oracle-exact" | "oracle-polished" | "sampled"

    @property
    def oracle(self) -> bool:
        return self.mode.startswith("oracle")


def _supports(p, sizes):
    for k in sizes:
        idx = list(itertools.combinations(range(p), k))
        if idx:
            yield k, np.asarray(idx, dtype=int)


def _sign_patterns(k):
    """All sign vectors in {+-1}^k with first entry +1 (mod global flip)."""
    if k == 0:
        return np.zeros((1, 0))
    rest = np.array(list(itertools.product([1.0, -1.0], repeat=k - 1)))
    return np.hstack([np.ones((rest.shape[0], 1)), rest])


def l1_cone_ok(u, s_mask, xi, tol=_FEAS_TOL):
    off = np.abs(u[~s_mask]).sum()
    on = np.abs(u[s_mask]).sum()
    return off <= xi * on + tol * max(1.0, off)


def _embed(p, T, v):
    u = np.zeros(p)
    u[T] = v
    return u


def re2_oracle(G, S, xi):
    """Exact min of u'Gu/u'u over the l1 cone by face enumeration.

    Candidates are eigenvectors of every support-restricted Gram (cone
    inactive) and of the Gram restricted to the cone's boundary hyperplane
    in every sign-orthant (cone active, via a Householder basis of the
    hyperplane so no penalization noise enters).
    """
    p = G.shape[0]
    s_mask = np.zeros(p, dtype=bool)
    s_mask[list(S)] = True
    best = math.inf
    best_u = None
    for k, idx in _supports(p, range(1, p + 1)):
        sub = G[idx[:, :, None], idx[:, None, :]]  # (C, k, k)
        in_s = s_mask[idx]  # (C, k)
        w, v = np.linalg.eigh(sub)  # eigenvectors in columns v[c, :, e]
        absv = np.abs(v)
        on = np.einsum("ck,cke->ce", in_s.astype(float), absv)
        off = np.einsum("ck,cke->ce", (~in_s).astype(float), absv)
        vals = np.where(off <= xi * on + 1e-9, w, math.inf)
        ci, ei = np.unravel_index(int(np.argmin(vals)), vals.shape)
        if vals[ci, ei] < best:
            best = float(vals[ci, ei])
            best_u = _embed(p, idx[ci], v[ci, :, ei])
        if k < 2:
            continue
        # cone-active faces: eigenproblem on the hyperplane c'u = 0 per orthant
        signs = _sign_patterns(k)  # (m, k)
        coef = np.where(in_s[:, None, :], -xi, 1.0) * signs[None, :, :]  # (C, m, k)
        chat = coef / np.linalg.norm(coef, axis=-1, keepdims=True)
        house = chat.copy()
        house[..., -1] += np.where(chat[..., -1] >= 0, 1.0, -1.0)
        hn = np.einsum("cmk,cmk->cm", house, house)
        H = np.eye(k)[None, None] - 2.0 * house[..., :, None] * house[..., None, :] / hn[..., None, None]
        Q = H[..., :, : k - 1]  # orthonormal basis of the hyperplane
        M = np.einsum("cmia,cij,cmjb->cmab", Q, sub, Q)
        w2, z = np.linalg.eigh(M)  # (C, m, k-1), (C, m, k-1, k-1)
        U = np.einsum("cmia,cmab->cmbi", Q, z)  # (C, m, e, k)
        sv = signs[None, :, None, :] * U
        amax = np.max(np.abs(U), axis=-1, keepdims=True)
        ok = np.all(sv >= -1e-8 * amax, axis=-1) | np.all(sv <= 1e-8 * amax, axis=-1)
        vals2 = np.where(ok, w2, math.inf)
        ci, si, ei = np.unravel_index(int(np.argmin(vals2)), vals2.shape)
        if vals2[ci, si, ei] < best:
            best = float(vals2[ci, si, ei])
            best_u = _embed(p, idx[ci], U[ci, si, ei])
    return max(best, 0.0), best_u


def re1_oracle(G, S, xi):
    """Exact min of |S| u'Gu / ||u_S||_1^2 over the l1 cone."""
    p = G.shape[0]
    S = list(S)
    s_mask = np.zeros(p, dtype=bool)
    s_mask[S] = True
    ns = len(S)
    best = math.inf
    best_u = None
    for k, idx in _supports(p, range(1, p + 1)):
        has_s = s_mask[idx].any(axis=1)
        idx_k = idx[has_s]
        if idx_k.size == 0:
            continue
        sub = G[idx_k[:, :, None], idx_k[:, None, :]]
        in_s = s_mask[idx_k]
        signs = _sign_patterns(k)
        m = signs.shape[0]
        gt = sub[:, None] * signs[None, :, None, :] * signs[None, :, :, None]  # (C, m, k, k)
        a_row = in_s[:, None, :] * np.ones((1, m, 1))  # ||u_S||_1 = sum_{T cap S} w
        c_row = np.where(in_s[:, None, :], -xi, 1.0) * np.ones((1, m, 1))
        for active in (False, True):
            rows = 2 if active else 1
            kk = np.zeros((idx_k.shape[0], m, k + rows, k + rows))
            kk[..., :k, :k] = 2.0 * gt
            kk[..., :k, k] = a_row
            kk[..., k, :k] = a_row
            if active:
                kk[..., :k, k + 1] = c_row
                kk[..., k + 1, :k] = c_row
            rhs = np.zeros(k + rows)
            rhs[k] = 1.0
            sol = np.linalg.pinv(kk) @ rhs
            wv = sol[..., :k]  # (C, m, k)
            a_dot = (wv * in_s[:, None, :]).sum(axis=-1)
            c_dot = (wv * np.where(in_s[:, None, :], -xi, 1.0)).sum(axis=-1)
            feas = np.all(wv >= -1e-8, axis=-1) & (np.abs(a_dot - 1.0) <= 1e-7)
            feas &= (c_dot <= 1e-8) if not active else (np.abs(c_dot) <= 1e-7)
            vals = ns * np.einsum("cmi,cmij,cmj->cm", wv, gt, wv)
            vals = np.where(feas, vals, math.inf)
            ci, si = np.unravel_index(int(np.argmin(vals)), vals.shape)
            if vals[ci, si] < best:
                best = float(vals[ci, si])
                best_u = _embed(p, idx_k[ci], signs[si] * wv[ci, si])
    return max(best, 0.0), best_u


def cif1_oracle(G, S, xi):
    """Exact CIF_1 via one LP per sign-orthant (normalization ||u||_1 = 1)."""
    p = G.shape[0]
    s_mask = np.zeros(p, dtype=bool)
    s_mask[list(S)] = True
    cone = np.where(s_mask, -xi, 1.0)
    best = math.inf
    best_u = None
    c_obj = np.zeros(p + 1)
    c_obj[p] = 1.0
    a_eq = np.zeros((1, p + 1))
    a_eq[0, :p] = 1.0
    for sg in _sign_patterns(p):
        gd = G * sg[None, :]
        a_ub = np.zeros((2 * p + 1, p + 1))
        a_ub[:p, :p] = gd
        a_ub[:p, p] = -1.0
        a_ub[p:2 * p, :p] = -gd
        a_ub[p:2 * p, p] = -1.0
        a_ub[2 * p, :p] = cone
        res = linprog(c_obj, A_ub=a_ub, b_ub=np.zeros(2 * p + 1), A_eq=a_eq,
                      b_eq=[1.0], bounds=[(0, None)] * (p + 1), method="highs")
        if res.status == 0 and res.fun < best:
            best = float(res.fun)
            best_u = sg * res.x[:p]
    return len(S) * best, best_u


def _cif_objective(G, s_count, q, U):
    """|S|^{1/q} ||G u||_inf / ||u||_q rowwise for U of shape (N, p)."""
    U = np.atleast_2d(U)
    num = np.max(np.abs(U @ G.T), axis=1)
    den = np.linalg.norm(U, ord=q, axis=1) if q != 1 else np.abs(U).sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = s_count ** (1.0 / q) * num / den
    return np.where(den > 0, vals, math.inf)


def _structured_patterns(p, S, xi):
    """Equal-magnitude cone patterns: mass on S, spillover on m off coords."""
    S = list(S)
    off = [j for j in range(p) if j not in S]
    out = []
    for m in range(0, len(off) + 1):
        u = np.zeros(p)
        u[S] = 1.0
        if m:
            budget = xi * len(S) * (1.0 - 1e-9)
            level = min(1.0, budget / m)
            u[off[:m]] = level
            # spill the remainder on one extra coordinate when level == 1
            if level == 1.0 and m < len(off) and budget - m > 1e-12:
                u2 = u.copy()
                u2[off[m]] = min(1.0, budget - m)
                out.append(u2)
        out.append(u)
    return out


def sample_l1_cone(p, S, xi, n_samples, seed, sparse_frac=0.6):
    """Random points of the closed l1 cone, with sparse off-support variants."""
    rng = np.random.Generator(np.random.Philox(seed))
    S = list(S)
    off = [j for j in range(p) if j not in S]
    U = rng.standard_normal((n_samples, p))
    if off:
        keep = rng.random((n_samples, len(off))) < rng.random((n_samples, 1)) * sparse_frac + (1 - sparse_frac)
        U[:, off] *= keep
        on_l1 = np.abs(U[:, S]).sum(axis=1)
        off_l1 = np.abs(U[:, off]).sum(axis=1)
        theta = rng.random(n_samples)
        scale = np.where(off_l1 > 0, theta * xi * on_l1 / np.where(off_l1 > 0, off_l1, 1.0), 0.0)
        U[:, off] *= scale[:, None]
    return U


def _cd_polish(obj, feasible, u0, iters=40, grid=None):
    """Coordinate-descent polish of a scale-invariant objective."""
    if grid is None:
        grid = np.array([-1.0, -0.5, -0.2, -0.05, -0.01, 0.01, 0.05, 0.2, 0.5, 1.0])
    u = u0 / max(np.max(np.abs(u0)), 1e-300)
    best = obj(u)
    p = u.size
    step = 1.0
    for _ in range(iters):
        improved = False
        for j in range(p):
            base = u[j]
            for d in grid * step:
                cand = u.copy()
                cand[j] = base + d
                if not np.any(cand):
                    continue
                if not feasible(cand):
                    continue
                v = obj(cand)
                if v < best - 1e-15:
                    best, u = v, cand
                    improved = True
        if not improved:
            step *= 0.3
            if step < 1e-6:
                break
    return best, u


def _slsqp_cif_polish(G, S, xi, q, u0):
    """Orthant-restricted epigraph SLSQP refinement for CIF_q, q > 1."""
    p = G.shape[0]
    s_mask = np.zeros(p, dtype=bool)
    s_mask[list(S)] = True
    sg = np.where(u0 >= 0, 1.0, -1.0)
    cone = np.where(s_mask, xi, -1.0) * sg
    nq = float(np.linalg.norm(u0, ord=q))
    if nq <= 0:
        return math.inf, u0
    x0 = np.concatenate([u0 / nq, [float(np.max(np.abs(G @ (u0 / nq))))]])

    def f(x):
        return x[p]

    cons = [
        {"type": "ineq", "fun": lambda x: x[p] - G @ x[:p]},
        {"type": "ineq", "fun": lambda x: x[p] + G @ x[:p]},
        {"type": "ineq", "fun": lambda x: sg * x[:p]},
        {"type": "ineq", "fun": lambda x: cone @ x[:p]},
        {"type": "eq", "fun": lambda x: np.sum(np.maximum(sg * x[:p], 0.0) ** q) - 1.0},
    ]
    res = minimize(f, x0, method="SLSQP", constraints=cons,
                   options={"maxiter": 200, "ftol": 1e-12})
    u = res.x[:p]
    nq = np.linalg.norm(u, ord=q)
    if not res.success or nq <= 1e-12 or not l1_cone_ok(u, s_mask, xi, tol=1e-7):
        return math.inf, u0
    val = float(_cif_objective(G, len(list(S)), q, u)[0])
    return val, u


def _best_of(obj, U):
    vals = obj(U)
    i = int(np.argmin(vals))
    return float(vals[i]), U[i]


def re_factors_estimate(G, S, xi, mode="auto", seed=0):
    """(RE1, RE2) cone estimates for the l1 cone (xi, S)."""
    p = G.shape[0]
    S = sorted(S)
    s_mask = np.zeros(p, dtype=bool)
    s_mask[S] = True
    use_oracle = mode == "oracle" or (mode == "auto" and p <= ORACLE_P_MAX)
    if use_oracle:
        v2, u2 = re2_oracle(G, S, xi)
        v1, u1 = re1_oracle(G, S, xi)
        return (
            ConeEstimate(math.sqrt(max(v1, 0.0)), u1, "oracle-exact"),
            ConeEstimate(math.sqrt(max(v2, 0.0)), u2, "oracle-exact"),
        )
    U = np.vstack([sample_l1_cone(p, S, xi, 100_000, seed)] + [_structured_patterns(p, S, xi)])
    quad = np.einsum("ni,ij,nj->n", U, G, U)
    l2 = np.einsum("ni,ni->n", U, U)
    s_l1 = np.abs(U[:, S]).sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        re2_vals = np.where(l2 > 0, quad / l2, math.inf)
        re1_vals = np.where(s_l1 > 0, len(S) * quad / s_l1 ** 2, math.inf)
    out = []
    for vals, norm_fun in ((re1_vals, lambda u: len(S) * float(u @ G @ u) / max(np.abs(u[S]).sum(), 1e-300) ** 2),
                           (re2_vals, lambda u: float(u @ G @ u) / max(float(u @ u), 1e-300))):
        order = np.argsort(vals)[:8]
        best, best_u = math.inf, None
        for i in order:
            v, u = _cd_polish(lambda w: norm_fun(w), lambda w: l1_cone_ok(w, s_mask, xi), U[i])
            if v < best:
                best, best_u = v, u
        out.append(ConeEstimate(math.sqrt(max(best, 0.0)), best_u, "sampled"))
    return out[0], out[1]


def cif_estimate(G, S, xi, q, mode="auto", seed=0):
    """CIF_q cone estimate; exact LP oracle for q == 1."""
    p = G.shape[0]
    S = sorted(S)
    s_mask = np.zeros(p, dtype=bool)
    s_mask[S] = True
    use_oracle = mode == "oracle" or (mode == "auto" and p <= ORACLE_P_MAX)

    def obj(U):
        return _cif_objective(G, len(S), q, U)

    if use_oracle and q == 1:
        val, u = cif1_oracle(G, S, xi)
        return ConeEstimate(val, u, "oracle-exact")

    pool = [np.asarray(v) for v in _structured_patterns(p, S, xi)]
    U = np.vstack([sample_l1_cone(p, S, xi, 60_000, seed)] + pool)
    vals = obj(U)
    order = np.argsort(vals)[:10]
    cands = [U[i] for i in order]
    if use_oracle:
        v1, u1 = cif1_oracle(G, S, xi)
        if u1 is not None:
            cands.append(u1)
        _, u2 = re2_oracle(G, S, xi)
        if u2 is not None:
            cands.append(u2)
    best, best_u = math.inf, None
    for u0 in cands:
        v, u = _cd_polish(lambda w: float(obj(w[None, :])[0]),
                          lambda w: l1_cone_ok(w, s_mask, xi), np.asarray(u0, dtype=float))
        if use_oracle and q > 1:
            v2, u2 = _slsqp_cif_polish(G, S, xi, q, u)
            if v2 < v:
                v, u = v2, u2
        if v < best:
            best, best_u = v, u
    mode_out = ("oracle-exact" if q == 1 else "oracle-polished") if use_oracle else "sampled"
    return ConeEstimate(best, best_u, mode_out)


def _l0_face_sizes(xi, a):
    """Largest admissible off-support count: c < xi * a on integers."""
    t = xi * a
    if abs(t - round(t)) < 1e-9:
        return int(round(t)) - 1
    return int(math.floor(t))


def penalty_cone_feasible(penalty, u, s_mask, xi, n_scales=161):
    """True when some positive scaling r puts r*u strictly inside the
    penalty cone ||rho(u_{S^c})||_1 < xi ||rho(u_S)||_1."""
    u = np.asarray(u, dtype=float)
    if not np.any(u[s_mask]):
        return False
    if penalty.family == pen.L0:
        on = int(np.count_nonzero(u[s_mask]))
        off = int(np.count_nonzero(u[~s_mask]))
        return off < xi * on - 1e-12
    scale = max(np.max(np.abs(u)), 1e-300)
    rs = penalty.lam / scale * np.geomspace(1e-4, 1e4, n_scales)
    vals_on = pen.rho(penalty, np.outer(rs, u[s_mask])).sum(axis=1)
    vals_off = pen.rho(penalty, np.outer(rs, u[~s_mask])).sum(axis=1) if np.any(~s_mask) else np.zeros_like(rs)
    margin = vals_off - xi * vals_on
    return bool(np.any(margin < -1e-12 * np.maximum(xi * vals_on, 1e-300)))


def _rif_l0(G, S, xi, q, seed):
    """RIF for the l0 penalty: exhaust maximal count-faces, polish each."""
    p = G.shape[0]
    S = sorted(S)
    k = len(S)
    s_mask = np.zeros(p, dtype=bool)
    s_mask[S] = True
    off = [j for j in range(p) if j not in S]
    rng = np.random.Generator(np.random.Philox(seed))

    def obj(u):
        return float(_cif_objective(G, k, q, u[None, :])[0])

    best, best_u = math.inf, None
    for a in range(1, k + 1):
        c_max = max(_l0_face_sizes(xi, a), 0)
        c_max = min(c_max, len(off))
        for T_s in itertools.combinations(S, a):
            face_sets = itertools.combinations(off, c_max) if c_max <= len(off) else []
            for T_c in face_sets:
                T = list(T_s) + list(T_c)
                starts = [np.ones(len(T))]
                starts += [rng.standard_normal(len(T)) for _ in range(3)]
                for v0 in starts:
                    u0 = _embed(p, np.asarray(T, dtype=int), v0)

                    def feas(w, T=T):
                        nz = np.flatnonzero(np.abs(w) > 1e-12 * max(np.max(np.abs(w)), 1e-300))
                        if not set(nz.tolist()) <= set(T):
                            return False
                        on = int(np.count_nonzero(np.abs(w[s_mask]) > 1e-12))
                        offn = int(np.count_nonzero(np.abs(w[~s_mask]) > 1e-12))
                        return on >= 1 and offn < xi * on - 1e-12

                    if not feas(u0):
                        continue
                    v, u = _cd_polish(obj, feas, u0, iters=25)
                    if v < best:
                        best, best_u = v, u
    return best, best_u


def rif_estimate(G, S, xi, q, penalty, mode="auto", seed=0):
    """RIF_q over the penalty cone; equals CIF_q exactly for the l1 penalty."""
    p = G.shape[0]
    S = sorted(S)
    s_mask = np.zeros(p, dtype=bool)
    s_mask[S] = True
    use_oracle = mode == "oracle" or (mode == "auto" and p <= ORACLE_P_MAX)
    if penalty.family == pen.L1:
        est = cif_estimate(G, S, xi, q, mode=mode, seed=seed)
        return ConeEstimate(est.value, est.minimizer, est.mode)
    if penalty.family == pen.L0:
        val, u = _rif_l0(G, S, xi, q, seed)
        return ConeEstimate(val, u, "oracle-polished" if use_oracle else "sampled")

    def obj(u):
        return float(_cif_objective(G, len(S), q, np.asarray(u)[None, :])[0])

    def feas(u):
        return penalty_cone_feasible(penalty, u, s_mask, xi)

    cands = []
    cif_est = cif_estimate(G, S, xi, q, mode=mode, seed=seed)
    if cif_est.minimizer is not None:
        cands.append(cif_est.minimizer)
    cands += _structured_patterns(p, S, xi)
    if penalty.bounded:
        l0_val, l0_u = _rif_l0(G, S, xi, q, seed + 1)
        if l0_u is not None:
            cands.append(l0_u)
    U = sample_l1_cone(p, S, xi, 20_000, seed + 2)
    vals = _cif_objective(G, len(S), q, U)
    cands += [U[i] for i in np.argsort(vals)[:6]]
    best, best_u = math.inf, None
    for u0 in cands:
        u0 = np.asarray(u0, dtype=float)
        if not feas(u0):
            continue
        v, u = _cd_polish(obj, feas, u0, iters=30)
        if v < best:
            best, best_u = v, u
    mode_out = "oracle-polished" if use_oracle else "sampled"
    return ConeEstimate(best, best_u, mode_out)
