"""Synthetic instance generation for y = X beta + eps.

Rows of the raw design are iid N(0, Sigma) with a unit-diagonal Sigma
(identity / Toeplitz / equicorrelated / custom); columns are then
normalized to ||x_j|| = sqrt(n).  Coefficient magnitudes follow one of
three regimes tied to the universal threshold level
lam_univ = sigma * sqrt((2/n) ln p):

* strong(c): every |beta_j| = c * lam_univ, random signs;
* decaying(c, ratio): geometric decay c * lam_univ * ratio^i;
* capped_l1: many small coefficients with
  sum_j min(1, |beta_j| / lam_univ) <= s.

Randomness comes from the counter-based Philox generator, so a seed
fully determines the instance on every platform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .design import DesignMatrix, normalize_columns


def universal_lambda(n, p, sigma) -> float:
    """sigma * sqrt((2/n) ln p)."""
    if p < 2:
        raise ValueError("p must be at least 2")
    return float(sigma) * math.sqrt(2.0 * math.log(p) / n)


@dataclass(frozen=True)
class SigmaSpec:
    kind: str = "identity"          # identity | toeplitz | equicorrelated | custom
    r: float = 0.0
    matrix: tuple | None = None     # row-major tuple-of-tuples for custom

    def build(self, p: int) -> np.ndarray:
        if self.kind == "identity":
            return np.eye(p)
        if self.kind == "toeplitz":
            if not -1 < self.r < 1:
                raise ValueError("toeplitz requires |r| < 1")
            return self.r ** np.abs(np.subtract.outer(np.arange(p), np.arange(p)))
        if self.kind == "equicorrelated":
            if not -1.0 / (p - 1) < self.r < 1:
                raise ValueError("equicorrelated requires r in (-1/(p-1), 1)")
            return (1 - self.r) * np.eye(p) + self.r * np.ones((p, p))
        if self.kind == "custom":
            S = np.asarray(self.matrix, dtype=float)
            if S.shape != (p, p):
                raise ValueError("custom Sigma has the wrong shape")
            if not np.allclose(np.diag(S), 1.0):
                raise ValueError("Sigma must have unit diagonal")
            w = np.linalg.eigvalsh(S)
            if w[0] <= 0:
                raise ValueError("Sigma must be positive definite")
            return S
        raise ValueError(f"unknown Sigma kind {self.kind!r}")

    @staticmethod
    def from_config(cfg) -> "SigmaSpec":
        if cfg is None:
            return SigmaSpec()
        m = cfg.get("matrix")
        return SigmaSpec(kind=cfg.get("kind", "identity"), r=float(cfg.get("r", 0.0)),
                         matrix=None if m is None else tuple(map(tuple, m)))


@dataclass(frozen=True)
class BetaSpec:
    kind: str = "strong"            # strong | decaying | capped_l1
    c: float = 4.0
    ratio: float = 0.5

    @staticmethod
    def from_config(cfg) -> "BetaSpec":
        if cfg is None:
            return BetaSpec()
        return BetaSpec(kind=cfg.get("kind", "strong"), c=float(cfg.get("c", 4.0)),
                        ratio=float(cfg.get("ratio", 0.5)))


@dataclass
class Instance:
    X: DesignMatrix
    y: np.ndarray
    beta: np.ndarray
    S: tuple
    sigma: float
    eps: np.ndarray
    seed: int
    meta: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.X.n

    @property
    def p(self):
        return self.X.p


def gen_instance(n, p, s, sigma_spec=None, beta_spec=None, noise_sigma=1.0,
                 seed=0, rademacher=False) -> Instance:
    """Draw one instance; bit-reproducible from the seed."""
    if not (0 <= s <= p and n >= 1):
        raise ValueError("need 0 <= s <= p and n >= 1")
    sigma_spec = sigma_spec or SigmaSpec()
    beta_spec = beta_spec or BetaSpec()
    Sigma = sigma_spec.build(p)
    rng = np.random.Generator(np.random.Philox(seed))
    raw = rng.standard_normal((n, p)) @ np.linalg.cholesky(Sigma).T
    dm = normalize_columns(raw)

    sigma_ref = noise_sigma if noise_sigma > 0 else 1.0
    lam_univ = universal_lambda(n, p, sigma_ref)
    beta = np.zeros(p)
    if beta_spec.kind == "capped_l1":
        k = min(p, max(2 * s, 1)) if s > 0 else 0
    else:
        k = s
    S = np.sort(rng.choice(p, size=k, replace=False)) if k else np.array([], dtype=int)
    signs = rng.choice([-1.0, 1.0], size=k)
    if k:
        if beta_spec.kind == "strong":
            mags = np.full(k, beta_spec.c * lam_univ)
        elif beta_spec.kind == "decaying":
            mags = beta_spec.c * lam_univ * beta_spec.ratio ** np.arange(k)
        elif beta_spec.kind == "capped_l1":
            w = rng.uniform(0.5, 1.0, size=k)
            mags = (0.95 * s / k) * lam_univ * w / w.mean()
            mags = np.minimum(mags, 0.95 * lam_univ)
        else:
            raise ValueError(f"unknown beta kind {beta_spec.kind!r}")
        beta[S] = signs * mags
    if rademacher:
        eps = noise_sigma * rng.choice([-1.0, 1.0], size=n)
    else:
        eps = noise_sigma * rng.standard_normal(n)
    y = dm.X @ beta + eps
    meta = {
        "n": n, "p": p, "s": s, "seed": seed, "noise_sigma": noise_sigma,
        "sigma_spec": {"kind": sigma_spec.kind, "r": sigma_spec.r},
        "beta_spec": {"kind": beta_spec.kind, "c": beta_spec.c, "ratio": beta_spec.ratio},
        "lam_univ": lam_univ,
        "noise": "rademacher (non-gaussian robustness flag)" if rademacher else "gaussian",
    }
    return Instance(X=dm, y=y, beta=beta, S=tuple(int(j) for j in S),
                    sigma=noise_sigma, eps=eps, seed=seed, meta=meta)
