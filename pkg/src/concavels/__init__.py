"""Concave-penalized least squares: solvers, diagnostics, theorem checks."""

from .penalties import (
    Penalty,
    bridge,
    capped_l1,
    delta_bound,
    envelope_bounds,
    l0,
    l1,
    mcp,
    nonconvexity_theta,
    prox,
    rho,
    rho_dot,
    rho_dot_interval,
    scad,
    scalar_prox,
    threshold_level,
)

__all__ = [
    "Penalty",
    "bridge",
    "capped_l1",
    "delta_bound",
    "envelope_bounds",
    "l0",
    "l1",
    "mcp",
    "nonconvexity_theta",
    "prox",
    "rho",
    "rho_dot",
    "rho_dot_interval",
    "scad",
    "scalar_prox",
    "threshold_level",
]
