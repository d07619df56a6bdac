"""Scalar penalty families for penalized least squares.

Implements the penalty calculus used everywhere else: the value rho(t),
one-sided derivatives, the threshold level

    lam_star = inf_{t>0} { t/2 + rho(t)/t },

the scalar proximal map argmin_t {(z-t)^2/2 + step*rho(t)}, capped-l1 /
quadratic-spline envelope bounds, the Delta(a, k) upper bound for sparse
vectors, and the nonconvexity measure

    theta(t, kappa) = sup_s { -sgn(s-t)(rho_dot(s) - rho_dot(t)) - kappa|s-t| }.

Families: l0, l1, capped_l1, mcp, scad, bridge.  All of them satisfy
rho(0)=0, evenness, monotonicity on [0, inf) and subadditivity; all but
bridge have lam_star == lam in closed form.  Derivatives at kinks are
represented as [right, left] intervals so callers can apply the
"most favorable value" convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import PenaltyParameterError, UnboundedDerivativeError

L0 = "l0"
L1 = "l1"
CAPPED_L1 = "capped_l1"
MCP = "mcp"
SCAD = "scad"
BRIDGE = "bridge"
FAMILIES = (L0, L1, CAPPED_L1, MCP, SCAD, BRIDGE)

_ALIASES = {
    "l0": L0,
    "l1": L1,
    "capped_l1": CAPPED_L1,
    "cappedl1": CAPPED_L1,
    "capped-l1": CAPPED_L1,
    "mcp": MCP,
    "scad": SCAD,
    "bridge": BRIDGE,
}


@dataclass(frozen=True)
class Penalty:
    """One member of a penalty family: rho(.; lam) with optional shape.

    gamma is the shape for capped_l1 (>= 1), mcp (>= 1) and scad (>= 2);
    alpha in (0, 1) is the bridge exponent.
    """

    family: str
    lam: float
    gamma: float | None = None
    alpha: float | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise PenaltyParameterError(f"unknown penalty family {self.family!r}")
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise PenaltyParameterError("lambda must be a positive finite real")
        if self.family in (CAPPED_L1, MCP):
            if self.gamma is None or self.gamma < 1:
                raise PenaltyParameterError(f"{self.family} requires gamma >= 1")
        elif self.family == SCAD:
            if self.gamma is None or self.gamma < 2:
                raise PenaltyParameterError("scad requires gamma >= 2")
        elif self.family == BRIDGE:
            if self.alpha is None or not (0 < self.alpha < 1):
                raise PenaltyParameterError("bridge requires alpha in (0, 1)")

    @property
    def bounded(self) -> bool:
        """True when max_t rho(t) is finite."""
        return self.family in (L0, CAPPED_L1, MCP, SCAD)

    def to_config(self) -> dict:
        cfg = {"family": self.family, "lambda": self.lam}
        if self.gamma is not None:
            cfg["gamma"] = self.gamma
        if self.alpha is not None:
            cfg["alpha"] = self.alpha
        return cfg

    @staticmethod
    def from_config(cfg: dict) -> "Penalty":
        """Build from {family, lambda, gamma?, alpha?} (family case-insensitive)."""
        fam = _ALIASES.get(str(cfg["family"]).lower().replace(" ", ""))
        if fam is None:
            raise PenaltyParameterError(f"unknown penalty family {cfg['family']!r}")
        return Penalty(
            family=fam,
            lam=float(cfg.get("lambda", cfg.get("lam"))),
            gamma=None if cfg.get("gamma") is None else float(cfg["gamma"]),
            alpha=None if cfg.get("alpha") is None else float(cfg["alpha"]),
        )


def l0(lam):
    return Penalty(L0, lam)


def l1(lam):
    return Penalty(L1, lam)


def capped_l1(lam, gamma):
    return Penalty(CAPPED_L1, lam, gamma=gamma)


def mcp(lam, gamma):
    return Penalty(MCP, lam, gamma=gamma)


def scad(lam, gamma):
    return Penalty(SCAD, lam, gamma=gamma)


def bridge(lam, alpha):
    return Penalty(BRIDGE, lam, alpha=alpha)


def _bridge_coef(p: Penalty) -> float:
    # rho(t) = coef * |t|^alpha with the normalization that makes lam_star = lam
    a = p.alpha
    return p.lam ** (2.0 - a) * (2.0 * (1.0 - a)) ** (1.0 - a) / (2.0 - a) ** (2.0 - a)


def rho(p: Penalty, t):
    """Penalty value rho(t; lam); accepts scalars or arrays, even in t."""
    a = np.abs(np.asarray(t, dtype=float))
    lam, g = p.lam, p.gamma
    if p.family == L0:
        out = np.where(a > 0, 0.5 * lam * lam, 0.0)
    elif p.family == L1:
        out = lam * a
    elif p.family == CAPPED_L1:
        out = np.minimum(0.5 * g * lam * lam, lam * a)
    elif p.family == MCP:
        out = np.where(a <= g * lam, lam * a - a * a / (2.0 * g), 0.5 * g * lam * lam)
    elif p.family == SCAD:
        mid = (g * lam * a - 0.5 * a * a - g * lam * lam + 0.5 * lam * lam) / (g - 1.0) + lam * lam
        out = np.where(a <= lam, lam * a, np.where(a <= g * lam, mid, 0.5 * (g + 1.0) * lam * lam))
    else:  # bridge
        out = _bridge_coef(p) * a ** p.alpha
    return out if out.ndim else float(out)


def rho_sum(p: Penalty, b) -> float:
    """||rho(b; lam)||_1 = sum_j rho(b_j)."""
    return float(np.sum(rho(p, np.asarray(b, dtype=float))))


def _dot_right_abs(p: Penalty, a):
    """Right derivative of rho at a >= 0 (array); inf where unbounded."""
    lam, g = p.lam, p.gamma
    if p.family == L0:
        return np.where(a > 0, 0.0, np.inf)
    if p.family == L1:
        return np.full_like(a, lam)
    if p.family == CAPPED_L1:
        return np.where(a < 0.5 * g * lam, lam, 0.0)
    if p.family == MCP:
        return np.maximum(lam - a / g, 0.0)
    if p.family == SCAD:
        return np.where(a < lam, lam, np.maximum(g * lam - a, 0.0) / (g - 1.0))
    coef = _bridge_coef(p)
    with np.errstate(divide="ignore"):
        return np.where(a > 0, coef * p.alpha * np.maximum(a, 1e-300) ** (p.alpha - 1.0), np.inf)


def _dot_left_abs(p: Penalty, a):
    """Left derivative of rho at a > 0; at a == 0 returns -rho_dot(0+)."""
    lam, g = p.lam, p.gamma
    if p.family == L0:
        return np.where(a > 0, 0.0, -np.inf)
    if p.family == L1:
        return np.where(a > 0, lam, -lam)
    if p.family == CAPPED_L1:
        right0 = np.where(a <= 0.5 * g * lam, lam, 0.0)
        return np.where(a > 0, right0, -lam)
    if p.family == MCP:
        return np.where(a > 0, np.maximum(lam - a / g, 0.0), -lam)
    if p.family == SCAD:
        val = np.where(a <= lam, lam, np.maximum(g * lam - a, 0.0) / (g - 1.0))
        return np.where(a > 0, val, -lam)
    coef = _bridge_coef(p)
    with np.errstate(divide="ignore"):
        return np.where(a > 0, coef * p.alpha * np.maximum(a, 1e-300) ** (p.alpha - 1.0), -np.inf)


def rho_dot_interval(p: Penalty, t):
    """Closed interval [lo, hi] of admissible derivative values at t.

    For t > 0 this is [rho_dot(t+), rho_dot(t-)] (concave families have
    right <= left); for t < 0 the odd reflection; for t == 0 it is
    [-rho_dot(0+), rho_dot(0+)].  Bridge at 0 raises: its derivative is
    unbounded there and every zero would be trivially stationary.
    """
    t_arr = np.asarray(t, dtype=float)
    a = np.abs(t_arr)
    if p.family == BRIDGE and np.any(t_arr == 0):
        raise UnboundedDerivativeError("bridge penalty has unbounded derivative at t=0")
    hi_abs = np.where(a > 0, _dot_left_abs(p, a), _dot_right_abs(p, np.zeros_like(a)))
    lo_abs = _dot_right_abs(p, a)
    # at t == 0: interval [-rho_dot(0+), rho_dot(0+)]
    lo = np.where(t_arr > 0, lo_abs, np.where(t_arr < 0, -hi_abs, -hi_abs))
    hi = np.where(t_arr > 0, hi_abs, np.where(t_arr < 0, -lo_abs, hi_abs))
    if lo.ndim:
        return lo, hi
    return float(lo), float(hi)


def rho_dot(p: Penalty, t, side: str = "right"):
    """One-sided derivative of rho at t.

    side is "left" or "right"; for the paper's favorable-value convention
    use rho_dot_interval and pick within the interval.
    """
    t_arr = np.asarray(t, dtype=float)
    if p.family == BRIDGE and np.any(t_arr == 0):
        raise UnboundedDerivativeError("bridge penalty has unbounded derivative at t=0")
    a = np.abs(t_arr)
    if side == "right":
        pos = _dot_right_abs(p, a)
        neg = -np.where(a > 0, _dot_left_abs(p, a), -_dot_right_abs(p, np.zeros_like(a)))
        out = np.where(t_arr >= 0, pos, neg)
    elif side == "left":
        pos = np.where(a > 0, _dot_left_abs(p, a), _dot_left_abs(p, np.zeros_like(a)))
        neg = -_dot_right_abs(p, a)
        out = np.where(t_arr > 0, pos, np.where(t_arr < 0, neg, _dot_left_abs(p, np.zeros_like(a))))
    else:
        raise ValueError("side must be 'left' or 'right'")
    return out if out.ndim else float(out)


def rho_dot_zero_plus(p: Penalty) -> float:
    """rho_dot(0+; lam); +inf for l0 and bridge."""
    return float(_dot_right_abs(p, np.asarray(0.0)))


@lru_cache(maxsize=None)
def _threshold_level_cached(p: Penalty) -> float:
    if p.family in (L1, CAPPED_L1, MCP, SCAD, L0):
        return p.lam
    # bridge: minimize t/2 + rho(t)/t on a log grid, then golden-section refine
    coef, a = _bridge_coef(p), p.alpha

    def f(t):
        return 0.5 * t + coef * t ** (a - 1.0)

    grid = np.geomspace(1e-8, 1e3, 4001)
    vals = f(grid)
    i = int(np.argmin(vals))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, grid.size - 1)]
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = hi - invphi * (hi - lo)
    x2 = lo + invphi * (hi - lo)
    f1, f2 = f(x1), f(x2)
    while (hi - lo) > 1e-10 * max(hi, 1e-300):
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - invphi * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + invphi * (hi - lo)
            f2 = f(x2)
    return float(f(0.5 * (lo + hi)))


def threshold_level(p: Penalty) -> float:
    """Threshold level lam_star = inf_{t>0} {t/2 + rho(t)/t}.

    Equals lam for l0/l1/capped_l1/mcp/scad; for bridge it is found
    numerically (and comes out equal to lam under this normalization).
    """
    return _threshold_level_cached(p)


def _pick_best(cands, objs):
    """Elementwise argmin over stacked candidates, ties to smaller |t|."""
    best_t = cands[0].copy()
    best_h = objs[0].copy()
    for t_c, h_c in zip(cands[1:], objs[1:]):
        better = h_c < best_h
        tie = (h_c == best_h) & (np.abs(t_c) < np.abs(best_t))
        take = better | tie
        best_t = np.where(take, t_c, best_t)
        best_h = np.where(take, h_c, best_h)
    return best_t


def prox(p: Penalty, z, step=1.0):
    """Scalar proximal map argmin_t {(z-t)^2/2 + step*rho(t; lam)}.

    Vectorized over z (and step); exact candidate-set minimization per
    family, ties broken toward the smaller magnitude.  prox(z) == 0 iff
    |z| <= threshold_level for step == 1.
    """
    z_arr = np.asarray(z, dtype=float)
    s = np.broadcast_to(np.asarray(step, dtype=float), z_arr.shape).astype(float)
    sign = np.sign(z_arr)
    a = np.abs(z_arr)
    lam, g = p.lam, p.gamma

    def obj(t):
        return 0.5 * (a - t) ** 2 + s * rho(p, t)

    if p.family == L1:
        best = np.maximum(a - s * lam, 0.0)
    elif p.family == L0:
        keep = a > np.sqrt(s) * lam
        best = np.where(keep, a, 0.0)
    elif p.family == CAPPED_L1:
        t1 = np.clip(a - s * lam, 0.0, 0.5 * g * lam)
        t2 = np.maximum(a, 0.5 * g * lam)
        cands = [np.zeros_like(a), t1, t2]
        best = _pick_best(cands, [obj(c) for c in cands])
    elif p.family == MCP:
        denom = 1.0 - s / g
        with np.errstate(divide="ignore", invalid="ignore"):
            t_in = np.where(denom > 0, (a - s * lam) / np.where(denom > 0, denom, 1.0), 0.0)
        t1 = np.clip(t_in, 0.0, g * lam)
        t2 = np.maximum(a, g * lam)
        cands = [np.zeros_like(a), t1, np.full_like(a, g * lam), t2]
        best = _pick_best(cands, [obj(c) for c in cands])
    elif p.family == SCAD:
        t1 = np.clip(a - s * lam, 0.0, lam)
        denom = 1.0 - s / (g - 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            t_in = np.where(denom > 0, (a - s * g * lam / (g - 1.0)) / np.where(denom > 0, denom, 1.0), 0.0)
        t2 = np.clip(t_in, lam, g * lam)
        t3 = np.maximum(a, g * lam)
        cands = [np.zeros_like(a), t1, np.full_like(a, lam), t2, np.full_like(a, g * lam), t3]
        best = _pick_best(cands, [obj(c) for c in cands])
    else:  # bridge: stationary root of h'(t) = t - a + s*coef*alpha*t^(alpha-1)
        coef, al = _bridge_coef(p), p.alpha
        best = np.zeros_like(a)
        flat_a = a.ravel()
        flat_s = s.ravel()
        flat_best = best.ravel()
        for i in range(flat_a.size):
            ai, si = flat_a[i], flat_s[i]
            if ai == 0:
                continue
            c = si * coef * al

            def hp(t):
                return t - ai + c * t ** (al - 1.0)

            t_c = (c * (1.0 - al)) ** (1.0 / (2.0 - al))
            if t_c >= ai or hp(t_c) >= 0:
                continue  # no interior minimum beats 0
            lo_b, hi_b = t_c, ai
            for _ in range(200):
                mid = 0.5 * (lo_b + hi_b)
                if hp(mid) < 0:
                    lo_b = mid
                else:
                    hi_b = mid
            t_m = 0.5 * (lo_b + hi_b)
            if 0.5 * (ai - t_m) ** 2 + si * coef * t_m ** al < 0.5 * ai * ai:
                flat_best[i] = t_m
        best = flat_best.reshape(a.shape)

    out = sign * best
    return out if out.ndim else float(out)


def scalar_prox(p: Penalty, z: float) -> float:
    """argmin_t {(z-t)^2/2 + rho(t; lam)}, ties toward smaller |t|."""
    return float(prox(p, float(z)))


def rho_star(t, zeta):
    """Quadratic-spline cap rho*(t; zeta) = zeta|t| + (zeta - |t|/2)_+^2 / 2."""
    a = np.abs(np.asarray(t, dtype=float))
    out = zeta * a + 0.5 * np.maximum(zeta - 0.5 * a, 0.0) ** 2
    return out if out.ndim else float(out)


def envelope_bounds(p: Penalty, t):
    """Capped-l1 lower and quadratic-spline upper envelope of rho at t.

    lower = min(lam_star*|t|/2, lam_star^2/2) <= rho(t) <= rho*(t; lam_star).
    """
    ls = threshold_level(p)
    a = np.abs(np.asarray(t, dtype=float))
    lower = np.minimum(0.5 * ls * a, 0.5 * ls * ls)
    upper = rho_star(a, ls)
    if lower.ndim:
        return lower, upper
    return float(lower), float(upper)


def max_rho(p: Penalty) -> float:
    """sup_t rho(t); inf for unbounded families (l1, bridge)."""
    lam, g = p.lam, p.gamma
    if p.family == L0:
        return 0.5 * lam * lam
    if p.family in (CAPPED_L1, MCP):
        return 0.5 * g * lam * lam
    if p.family == SCAD:
        return 0.5 * (g + 1.0) * lam * lam
    return math.inf


def gamma_star(p: Penalty) -> float:
    """max_t rho(t)/lam^2: 1/2 (l0), gamma/2 (capped_l1, mcp), (gamma+1)/2 (scad)."""
    return max_rho(p) / (p.lam * p.lam)


def delta_bound(p: Penalty, a: float, k: int) -> float:
    """Upper bound on Delta(a, k) = sup{||rho(b)||_1 : ||b||_1 <= a*k, ||b||_0 = k}.

    Returns min(k * rho*(a; lam_star), k * max_t rho(t)), the second term
    applying only to bounded penalties.
    """
    if k == 0:
        return 0.0
    ls = threshold_level(p)
    val = k * rho_star(a, ls)
    if p.bounded:
        val = min(val, k * max_rho(p))
    return float(val)


def max_concavity(p: Penalty) -> float:
    """kappa* = sup_{0<s<t} (rho_dot(s) - rho_dot(t))/(t - s).

    0 for l1 (and for l0 restricted to t > 0), 1/gamma for mcp,
    1/(gamma-1) for scad; infinite for capped_l1 and bridge whose
    derivative jumps or blows up.
    """
    if p.family in (L1, L0):
        return 0.0
    if p.family == MCP:
        return 1.0 / p.gamma
    if p.family == SCAD:
        return 1.0 / (p.gamma - 1.0)
    return math.inf


def theta_vanishing_kappa(p: Penalty) -> float:
    """Smallest kappa with theta(0+, kappa) = 0 and theta(t, kappa) = 0 for all
    large |t|: 0 (l1), 1/gamma (mcp), 1/(gamma-1) (scad), 2/gamma (capped_l1).

    Infinite for l0/bridge (derivative blows up at 0+)."""
    if p.family == L1:
        return 0.0
    if p.family == MCP:
        return 1.0 / p.gamma
    if p.family == SCAD:
        return 1.0 / (p.gamma - 1.0)
    if p.family == CAPPED_L1:
        return 2.0 / p.gamma
    return math.inf


def _dot_breakpoints(p: Penalty):
    """Positive kink locations of rho_dot (piecewise-linear families)."""
    lam, g = p.lam, p.gamma
    if p.family in (L0, L1):
        return []
    if p.family == CAPPED_L1:
        return [0.5 * g * lam]
    if p.family == MCP:
        return [g * lam]
    if p.family == SCAD:
        return [lam, g * lam]
    return None  # bridge: not piecewise linear


def _theta_sides(p: Penalty, t: float, kappa: float, s_right, s_left):
    """max of (-rho_dot(s) - kappa(s-t)) over s_right and of
    (rho_dot(s) - kappa(t-s)) over s_left, one-sided values at kinks."""
    big = -math.inf
    a_val = big
    for s, side in s_right:
        d = rho_dot(p, s, side)
        a_val = max(a_val, -d - kappa * (s - t))
    b_val = big
    for s, side in s_left:
        d = rho_dot(p, s, side)
        b_val = max(b_val, d - kappa * (t - s))
    return a_val, b_val


def nonconvexity_theta(p: Penalty, t: float, kappa: float, mode: str = "analytic") -> float:
    """Nonconvexity measure theta(t, kappa), clamped at 0 from below.

    t == 0 is read as the 0+ limit.  Analytic mode evaluates the supremum
    on the kink set of the piecewise-linear rho_dot; grid mode is a dense
    fallback (and the only mode for bridge).  l0 and bridge return +inf
    for any finite kappa: their derivative blows up at 0+.
    """
    if kappa < 0:
        raise ValueError("kappa must be nonnegative")
    t = abs(float(t))
    if not math.isfinite(rho_dot_zero_plus(p)):
        return math.inf
    bps = _dot_breakpoints(p)
    if mode == "analytic" and bps is not None:
        tail = max([t] + bps) + 1.0  # rho_dot constant beyond the last kink
        s_right = [(t, "right")]
        for b in bps:
            if b > t:
                s_right += [(b, "left"), (b, "right")]
        if kappa == 0:
            s_right.append((tail, "right"))
        if t > 0:
            s_left = [(t, "left"), (0.0, "right")]
            for b in bps:
                if b < t:
                    s_left += [(b, "left"), (b, "right")]
        else:
            s_left = []
        a_val, b_val = _theta_sides(p, t, kappa, s_right, s_left)
        lo, hi = (rho_dot(p, t, "right"), rho_dot(p, t, "left")) if t > 0 else (
            rho_dot_zero_plus(p), rho_dot_zero_plus(p))
        lo, hi = min(lo, hi), max(lo, hi)
    else:
        span = 10.0 * max(p.lam, (p.gamma or 1.0) * p.lam, t)
        grid = np.linspace(0.0, span, 10_000)[1:]
        extra = [t] + (bps or [])
        eps = 1e-9 * max(span, 1.0)
        pts = np.concatenate([grid, np.asarray([max(x - eps, eps / 2) for x in extra] +
                                               [x + eps for x in extra])])
        pts = np.unique(pts[pts > 0])
        dots = rho_dot(p, pts, "right")
        right_mask = pts > t
        a_val = float(np.max(-dots[right_mask] - kappa * (pts[right_mask] - t), initial=-math.inf))
        a_val = max(a_val, -rho_dot(p, t + eps, "right"))
        if t > 0:
            left_mask = pts < t
            b_val = float(np.max(dots[left_mask] - kappa * (t - pts[left_mask]), initial=-math.inf))
        else:
            b_val = -math.inf
        if t > 0:
            lo, hi = rho_dot(p, t, "right"), rho_dot(p, t, "left")
            lo, hi = min(lo, hi), max(lo, hi)
        else:
            lo = hi = rho_dot_zero_plus(p)
    if t == 0:
        return max(0.0, a_val + rho_dot_zero_plus(p))
    d_star = min(max((b_val - a_val) / 2.0, lo), hi)
    return max(0.0, a_val + d_star, b_val - d_star)


def theta_vector(p: Penalty, u, kappa: float):
    """Componentwise theta(|u_j|, kappa) (0 entries read as 0+)."""
    u = np.asarray(u, dtype=float)
    return np.asarray([nonconvexity_theta(p, abs(x), kappa) for x in u.ravel()]).reshape(u.shape)
