"""Design-matrix container and regularity diagnostics.

Holds the column-normalized design (||x_j||_2 = sqrt(n)), sparse
eigenvalues kappa_-(m) / kappa_+(m), the restricted-eigenvalue and
compatibility factors RE2 / RE1, cone and restricted invertibility
factors CIF_q / RIF_q, the classical irrepresentable quantities
theta1* / theta2*, their penalty-dependent generalizations theta1 /
theta2, and the chain of comparison inequalities between all of these.

Support sets are plain sorted tuples of 0-based column indices.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import cones
from . import penalties as pen
from .errors import (
    DegenerateDesignError,
    EnumerationCapError,
    RankDeficientError,
)
from .reports import TheoremReport, leq

ENUM_CAP = 200_000
NORM_RTOL = 1e-12


@dataclass
class DesignMatrix:
    """n x p design with column scaling bookkeeping.

    scales[j] is the factor the j-th raw column was multiplied by, so the
    raw matrix is recovered as X / scales.
    """

    X: np.ndarray
    normalized: bool = False
    scales: np.ndarray | None = None
    _gram: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        if self.X.ndim != 2 or min(self.X.shape) == 0:
            raise DegenerateDesignError("design must be a nonempty 2-d matrix")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def gram(self) -> np.ndarray:
        """X'X/n, cached."""
        if self._gram is None:
            self._gram = self.X.T @ self.X / self.n
        return self._gram

    def check_normalized(self):
        norms = np.linalg.norm(self.X, axis=0)
        target = math.sqrt(self.n)
        return bool(np.all(np.abs(norms - target) <= NORM_RTOL * target * 10))


def normalize_columns(X) -> DesignMatrix:
    """Scale each column to ||x_j||_2 = sqrt(n); factors kept for round-trip."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DegenerateDesignError("expected a 2-d matrix")
    n = X.shape[0]
    norms = np.linalg.norm(X, axis=0)
    if np.any(norms == 0):
        raise DegenerateDesignError("zero column cannot be normalized")
    scales = math.sqrt(n) / norms
    out = X * scales[None, :]
    dm = DesignMatrix(out, normalized=True, scales=scales)
    dm.X.setflags(write=False)
    return dm


def as_design(X) -> DesignMatrix:
    if isinstance(X, DesignMatrix):
        return X
    return DesignMatrix(np.asarray(X, dtype=float))


@dataclass
class SparseEig:
    m: int
    kappa_minus: float
    kappa_plus: float
    exact: bool


def _comb(n, k):
    return math.comb(n, k)


def sparse_eigenvalues(dm, m: int, cap: int = ENUM_CAP, seed: int = 0) -> SparseEig:
    """Extreme eigenvalues of X_A'X_A/n over all supports |A| = m.

    Exact below the enumeration cap; above it, randomized supports plus
    greedy single-swap refinement, flagged exact=False.
    """
    dm = as_design(dm)
    p = dm.p
    if not (1 <= m <= p):
        raise ValueError(f"m must be in [1, {p}]")
    G = dm.gram()
    if _comb(p, m) <= cap:
        idx = np.asarray(list(itertools.combinations(range(p), m)), dtype=int)
        sub = G[idx[:, :, None], idx[:, None, :]]
        w = np.linalg.eigvalsh(sub)
        return SparseEig(m, float(w[:, 0].min()), float(w[:, -1].max()), True)
    rng = np.random.Generator(np.random.Philox(seed))
    kmin, kmax = math.inf, -math.inf
    arg_min = arg_max = None
    for _ in range(256):
        A = np.sort(rng.choice(p, size=m, replace=False))
        w = np.linalg.eigvalsh(G[np.ix_(A, A)])
        if w[0] < kmin:
            kmin, arg_min = float(w[0]), A
        if w[-1] > kmax:
            kmax, arg_max = float(w[-1]), A
    for which in ("min", "max"):
        A = (arg_min if which == "min" else arg_max).tolist()
        improved = True
        while improved:
            improved = False
            outside = [j for j in range(p) if j not in A]
            for i, ji in enumerate(A):
                for jo in outside:
                    B = sorted(A[:i] + A[i + 1:] + [jo])
                    w = np.linalg.eigvalsh(G[np.ix_(B, B)])
                    if which == "min" and w[0] < kmin - 1e-14:
                        kmin, A, improved = float(w[0]), B, True
                        break
                    if which == "max" and w[-1] > kmax + 1e-14:
                        kmax, A, improved = float(w[-1]), B, True
                        break
                if improved:
                    break
    return SparseEig(m, kmin, kmax, False)


def kappa_minus(dm, m, **kw) -> float:
    return sparse_eigenvalues(dm, m, **kw).kappa_minus


def kappa_plus(dm, m, **kw) -> float:
    return sparse_eigenvalues(dm, m, **kw).kappa_plus


def kappa_table(dm, ms, **kw):
    return {m: sparse_eigenvalues(dm, m, **kw) for m in ms}


def support_complement(p, S):
    return [j for j in range(p) if j not in set(S)]


def irrepresentable(dm, S, signs):
    """theta1* = ||(X_S'X_S/n)^{-1} sgn||_inf and
    theta2* = ||X_{S^c}'X_S (X_S'X_S)^{-1} sgn||_inf."""
    dm = as_design(dm)
    S = sorted(S)
    signs = np.asarray(signs, dtype=float)
    if signs.shape != (len(S),) or not np.all(np.abs(signs) == 1.0):
        raise ValueError("signs must be a +-1 vector over S")
    Gss = dm.gram()[np.ix_(S, S)]
    try:
        ginv_s = np.linalg.solve(Gss, signs)
    except np.linalg.LinAlgError as e:
        raise RankDeficientError("X_S'X_S is singular") from e
    if not np.all(np.isfinite(ginv_s)) or np.linalg.cond(Gss) > 1e12:
        raise RankDeficientError("X_S'X_S is numerically singular")
    theta1 = float(np.max(np.abs(ginv_s)))
    Sc = support_complement(dm.p, S)
    if Sc:
        Gcs = dm.gram()[np.ix_(Sc, S)]
        theta2 = float(np.max(np.abs(Gcs @ ginv_s)))
    else:
        theta2 = 0.0
    return theta1, theta2


def _rho_dot_range(penalty, lo, hi):
    """[min, max] of admissible derivative values of rho over [lo, hi]."""
    cands = [lo, hi]
    if lo < 0.0 < hi:
        cands.append(0.0)
    bps = pen._dot_breakpoints(penalty) or []
    for b in bps:
        for s in (b, -b):
            if lo < s < hi:
                cands.append(s)
    vals = []
    for t in cands:
        a, b = pen.rho_dot_interval(penalty, t)
        vals += [a, b]
    return min(vals), max(vals)


def _box_sup_linf(M, lo, hi):
    """sup of ||M w||_inf over the box w in prod [lo_j, hi_j]."""
    up = np.maximum(M * lo[None, :], M * hi[None, :]).sum(axis=1)
    dn = np.minimum(M * lo[None, :], M * hi[None, :]).sum(axis=1)
    return float(np.max(np.maximum(up, -dn), initial=0.0))


def generalized_theta(dm, penalty, S, beta_o_S, theta_cap=1e3, iters=60):
    """Penalty-dependent (theta1, theta2) around the oracle LSE values.

    theta1 = inf{theta : ||(X_S'X_S/n)^{-1} rho_dot(v + beta_o_S)||_inf
                          <= theta*lam_star for all ||v||_inf <= theta*lam_star},
    found by scanning H(theta) - theta for its first nonpositive point and
    bisecting; the inner supremum is exact because rho_dot over an interval
    spans a box, and a linear functional over a box peaks at a corner.
    Returns (inf, inf) when no fixed point exists below the cap.
    """
    dm = as_design(dm)
    S = sorted(S)
    beta_o_S = np.asarray(beta_o_S, dtype=float)
    Gss = dm.gram()[np.ix_(S, S)]
    try:
        Ginv = np.linalg.inv(Gss)
    except np.linalg.LinAlgError as e:
        raise RankDeficientError("X_S'X_S is singular") from e
    ls = pen.threshold_level(penalty)
    Sc = support_complement(dm.p, S)
    M2 = dm.gram()[np.ix_(Sc, S)] @ Ginv if Sc else None

    def ranges(radius):
        lo = np.empty(len(S))
        hi = np.empty(len(S))
        for j, b in enumerate(beta_o_S):
            lo[j], hi[j] = _rho_dot_range(penalty, b - radius, b + radius)
        return lo, hi

    def H(theta):
        lo, hi = ranges(theta * ls)
        return _box_sup_linf(Ginv, lo, hi) / ls

    h0 = H(0.0)
    if h0 <= 1e-14:
        return 0.0, 0.0
    theta1 = None
    grid = np.unique(np.concatenate([[h0], np.geomspace(max(h0, 1e-8), theta_cap, 400)]))
    prev = 0.0
    for theta in grid:
        if H(theta) <= theta:
            lo_b, hi_b = prev, theta
            for _ in range(iters):
                mid = 0.5 * (lo_b + hi_b)
                if H(mid) <= mid:
                    hi_b = mid
                else:
                    lo_b = mid
            theta1 = hi_b
            break
        prev = theta
    if theta1 is None:
        return math.inf, math.inf
    if M2 is None:
        return theta1, 0.0
    lo, hi = ranges(theta1 * ls)
    theta2 = _box_sup_linf(M2, lo, hi) / ls
    return theta1, theta2


def re_factors(dm, xi, S, mode="auto", seed=0):
    """(RE1, RE2) estimates; see cones.re_factors_estimate."""
    dm = as_design(dm)
    if not S:
        raise ValueError("S must be nonempty")
    return cones.re_factors_estimate(dm.gram(), sorted(S), xi, mode=mode, seed=seed)


def cif(dm, q, xi, S, mode="auto", seed=0):
    dm = as_design(dm)
    if not S:
        raise ValueError("S must be nonempty")
    if not 1 <= q <= 8:
        raise ValueError("q must lie in [1, 8]")
    return cones.cif_estimate(dm.gram(), sorted(S), xi, q, mode=mode, seed=seed)


def rif(dm, penalty, q, xi, S, mode="auto", seed=0):
    dm = as_design(dm)
    if not S:
        raise ValueError("S must be nonempty")
    if not 1 <= q <= 8:
        raise ValueError("q must lie in [1, 8]")
    return cones.rif_estimate(dm.gram(), sorted(S), xi, q, penalty, mode=mode, seed=seed)


def min_cif_over_supports(dm, q, xi, k, mode="auto", seed=0):
    """min over all supports |A| = k of CIF_q(xi, A); small p only."""
    dm = as_design(dm)
    best = math.inf
    for A in itertools.combinations(range(dm.p), k):
        best = min(best, cif(dm, q, xi, list(A), mode=mode, seed=seed).value)
    return best


def cif_sparse_eigen_lower(dm, q, xi, S, ell):
    """kappa-based lower bound on CIF_q for 1 <= ell <= (p-|S|)/5."""
    k = len(S)
    num = kappa_minus(dm, k + ell) - 0.5 * xi * math.sqrt(k / ell) * kappa_plus(dm, k + 5 * ell)
    den = (1 + xi) ** (2.0 / q - 1.0) * (1 + xi * xi * k / (4.0 * ell)) ** (1.0 - 1.0 / q) \
        * math.sqrt(1.0 + ell / k)
    if not 1 <= q <= 2:
        return -math.inf
    return num / den


def check_factor_inequalities(dm, xi, S, mode="auto", seed=0) -> TheoremReport:
    """Comparison chain between CIF, RE1, RE2 and the sparse-eigenvalue
    lower bound on CIF; reports each inequality's slack."""
    dm = as_design(dm)
    S = sorted(S)
    rep = TheoremReport("factor-comparison")
    rep.add_premise("p-small-enough", dm.p, dm.p <= cones.ORACLE_P_MAX or mode == "sampled")
    est_re1, est_re2 = re_factors(dm, xi, S, mode=mode, seed=seed)
    cif1 = cif(dm, 1, xi, S, mode=mode, seed=seed)
    cif2 = cif(dm, 2, xi, S, mode=mode, seed=seed)
    rep.details["values"] = {"re1": est_re1.value, "re2": est_re2.value,
                             "cif1": cif1.value, "cif2": cif2.value,
                             "mode": est_re1.mode}
    checks = [
        ("re2<=re1", est_re2.value, est_re1.value),
        ("re1^2/(1+xi)^2<=cif1", est_re1.value ** 2 / (1 + xi) ** 2, cif1.value),
        ("re1*re2/(1+xi)<=cif2", est_re1.value * est_re2.value / (1 + xi), cif2.value),
        ("re2^2/(1+xi)<=re1*re2/(1+xi)", est_re2.value ** 2 / (1 + xi),
         est_re1.value * est_re2.value / (1 + xi)),
    ]
    ells = [ell for ell in range(1, dm.p + 1) if ell <= (dm.p - len(S)) / 5]
    if ells:
        for q, est in ((1, cif1), (2, cif2)):
            lower = max(cif_sparse_eigen_lower(dm, q, xi, S, ell) for ell in ells)
            rep.details[f"kappa-lower-q{q}"] = lower
            checks.append((f"kappa-lower<=cif{q}", lower, est.value))
    else:
        rep.details["kappa-lower"] = "not-applicable (no admissible ell)"
    return rep.finish(checks)


@dataclass
class RegularityReport:
    """Bundle of every regularity diagnostic computed for one design."""

    n: int
    p: int
    kappa: dict = field(default_factory=dict)          # m -> SparseEig
    re1: float | None = None
    re2: float | None = None
    cif: dict = field(default_factory=dict)            # (q, xi) -> value
    rif: dict = field(default_factory=dict)            # (family, q, xi) -> value
    theta1_star: float | None = None
    theta2_star: float | None = None
    theta1: float | None = None
    theta2: float | None = None
    cif_lower_bound: float | None = None
    null_consistency: dict | None = None
    heuristic: bool = False
    mode: str = ""

    def to_dict(self):
        return {
            "n": self.n, "p": self.p,
            "kappa": {str(m): {"kappa_minus": se.kappa_minus, "kappa_plus": se.kappa_plus,
                               "exact": se.exact} for m, se in self.kappa.items()},
            "re1": self.re1, "re2": self.re2,
            "cif": {f"q={q},xi={x}": v for (q, x), v in self.cif.items()},
            "rif": {f"{fam},q={q},xi={x}": v for (fam, q, x), v in self.rif.items()},
            "theta1_star": self.theta1_star, "theta2_star": self.theta2_star,
            "theta1": self.theta1, "theta2": self.theta2,
            "cif_lower_bound": self.cif_lower_bound,
            "null_consistency": self.null_consistency,
            "heuristic": self.heuristic, "mode": self.mode,
        }


def build_regularity_report(dm, S=None, xi=1.0, qs=(1, 2), m_range=None,
                            penalty=None, beta_o_S=None, signs=None,
                            mode="auto", seed=0, cap=ENUM_CAP) -> RegularityReport:
    dm = as_design(dm)
    rep = RegularityReport(n=dm.n, p=dm.p)
    ms = m_range if m_range is not None else range(1, dm.p + 1)
    heuristic = False
    for m in ms:
        se = sparse_eigenvalues(dm, m, cap=cap, seed=seed)
        rep.kappa[m] = se
        heuristic |= not se.exact
    if S:
        S = sorted(S)
        est1, est2 = re_factors(dm, xi, S, mode=mode, seed=seed)
        rep.re1, rep.re2 = est1.value, est2.value
        rep.mode = est1.mode
        heuristic |= not est1.oracle
        for q in qs:
            est = cif(dm, q, xi, S, mode=mode, seed=seed)
            rep.cif[(q, xi)] = est.value
            heuristic |= not est.oracle
            if penalty is not None:
                rep.rif[(penalty.family, q, xi)] = rif(dm, penalty, q, xi, S,
                                                       mode=mode, seed=seed).value
        ells = [ell for ell in range(1, dm.p + 1) if ell <= (dm.p - len(S)) / 5]
        if ells:
            rep.cif_lower_bound = max(cif_sparse_eigen_lower(dm, 2, xi, S, ell)
                                      for ell in ells)
        sgn = np.asarray(signs, dtype=float) if signs is not None else np.ones(len(S))
        try:
            rep.theta1_star, rep.theta2_star = irrepresentable(dm, S, sgn)
        except RankDeficientError:
            pass
        if penalty is not None and beta_o_S is not None:
            rep.theta1, rep.theta2 = generalized_theta(dm, penalty, S, beta_o_S)
    rep.heuristic = heuristic
    return rep


def enumeration_size(p, max_support):
    return sum(_comb(p, k) for k in range(max_support + 1))


def require_enumerable(p, max_support, cap=ENUM_CAP):
    total = enumeration_size(p, max_support)
    if total > cap:
        raise EnumerationCapError(
            f"enumerating {total} supports exceeds cap {cap}; "
            f"reduce max_support or raise the cap")
    return total
