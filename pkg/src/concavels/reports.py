"""Report containers shared by the diagnostics and the theorem checkers."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

TOL_ABS = 1e-8
TOL_REL = 1e-8
VEC_EQ_TOL = 1e-6

PASS = "pass"
PREMISE_FAILED = "premise-failed"
VIOLATED = "violated"
NOT_APPLICABLE = "not-applicable"
INCONCLUSIVE = "inconclusive"


def leq(observed, bound, tol_abs=TOL_ABS, tol_rel=TOL_REL):
    """observed <= bound under the package tolerance policy."""
    if math.isnan(observed) or math.isnan(bound):
        return False
    return observed <= bound + tol_abs + tol_rel * abs(bound)


def slack(observed, bound):
    """bound - observed; positive when the inequality holds with room."""
    return bound - observed


@dataclass
class Premise:
    name: str
    value: object
    satisfied: bool


@dataclass
class TheoremReport:
    theorem_id: str
    premises: list[Premise] = field(default_factory=list)
    bound: float = math.nan
    observed: float = math.nan
    passed: bool = True
    status: str = PASS
    witness: dict | None = None
    details: dict = field(default_factory=dict)

    def add_premise(self, name, value, satisfied):
        self.premises.append(Premise(name, value, bool(satisfied)))
        return bool(satisfied)

    def premises_ok(self) -> bool:
        return all(pr.satisfied for pr in self.premises)

    def finish(self, checks):
        """checks: list of (name, observed, bound). Sets status/pass fields.

        A failed premise gates the report (vacuous pass, flagged); otherwise
        the binding inequality decides, and every inequality is recorded.
        """
        for name, obs, bnd in checks:
            self.details[name] = {"observed": obs, "bound": bnd, "slack": slack(obs, bnd),
                                  "ok": leq(obs, bnd)}
        if not self.premises_ok():
            self.status = PREMISE_FAILED
            self.passed = True
            return self
        bad = [name for name, obs, bnd in checks if not leq(obs, bnd)]
        if checks:
            worst = min(checks, key=lambda c: slack(c[1], c[2]))
            self.observed, self.bound = worst[1], worst[2]
        if bad:
            self.status = VIOLATED
            self.passed = False
            self.witness = (self.witness or {}) | {"failed": bad}
        else:
            self.status = PASS
            self.passed = True
        return self

    def to_dict(self):
        return {
            "theorem_id": self.theorem_id,
            "premises": [{"name": pr.name, "value": _jsonable(pr.value),
                          "satisfied": pr.satisfied} for pr in self.premises],
            "bound": _jsonable(self.bound),
            "observed": _jsonable(self.observed),
            "passed": self.passed,
            "status": self.status,
            "witness": _jsonable(self.witness),
            "details": _jsonable(self.details),
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


@dataclass
class NullConsistencyVerdict:
    eta: float
    holds: bool
    best_objective_drop: float
    witness_b: np.ndarray | None
    mode: str  # "l1-exact" | "enumerate" | "falsifier"

    def to_dict(self):
        return {"eta": self.eta, "holds": self.holds,
                "best_objective_drop": self.best_objective_drop,
                "witness_b": _jsonable(self.witness_b), "mode": self.mode}


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, float) and (math.isinf(x) or math.isnan(x)):
        return repr(x)
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def wilson_interval(successes: int, trials: int, z: float = 1.959963984540054):
    """Wilson score interval for a binomial proportion."""
    if trials == 0:
        return 0.0, 1.0
    phat = successes / trials
    denom = 1.0 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    return center - half, center + half
