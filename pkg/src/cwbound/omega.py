"""Turning verified value rates into exponent bounds.

A tensor power at level l fits in rank budget (q + 2)^m with m = 2^(l-1),
so a verified value rate of at least m * log2(q + 2) at parameter tau
certifies the exponent bound omega <= 3 tau.  `omega_from_value` bisects
for the smallest such tau; `certify_at_tau` checks a single rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from .errors import NoFeasibleTau, OutOfRange

TAU_MIN = 2.0 / 3.0
TAU_MAX = 1.0


def schonhage_target(level: int, q: int) -> float:
    """Rate a level-l power must reach: 2^(l-1) * log2(q + 2)."""
    if level < 1:
        raise OutOfRange(f"level {level}")
    if q < 1:
        raise OutOfRange(f"q = {q}")
    return float(1 << (level - 1)) * math.log2(q + 2)


@dataclass(frozen=True)
class OmegaResult:
    omega: float
    tau: float
    level: int
    q: int
    log2_target: float
    log2_bound: float
    iterations: int


def certify_at_tau(log2_value: float, level: int, q: int, tau: float) -> OmegaResult:
    """One-shot certificate: a sufficient rate at fixed tau bounds omega."""
    if not (TAU_MIN <= tau <= TAU_MAX):
        raise OutOfRange(f"tau = {tau} outside [{TAU_MIN}, {TAU_MAX}]")
    target = schonhage_target(level, q)
    if log2_value < target:
        raise NoFeasibleTau(
            f"rate {log2_value:.12f} below target {target:.12f} at tau {tau}"
        )
    return OmegaResult(
        omega=3.0 * tau, tau=tau, level=level, q=q,
        log2_target=target, log2_bound=log2_value, iterations=0,
    )


def omega_from_value(
    bound_fn: Callable[[float], float],
    level: int,
    q: int,
    *,
    tol: float = 1e-9,
    max_iter: int = 200,
) -> OmegaResult:
    """Bisect for the smallest tau whose verified rate reaches the target.

    `bound_fn(tau)` must return the certified log2 value rate at that tau;
    it is re-evaluated at the returned tau, so the result is itself a
    certificate (log2_bound >= log2_target always holds on return).
    Raises NoFeasibleTau when even tau = 1 falls short.
    """
    if tol <= 0:
        raise OutOfRange(f"tol = {tol}")
    target = schonhage_target(level, q)
    lo, hi = TAU_MIN, TAU_MAX
    if bound_fn(hi) < target:
        raise NoFeasibleTau(
            f"rate {bound_fn(hi):.12f} at tau = 1 below target {target:.12f}"
        )
    iterations = 0
    if bound_fn(lo) >= target:
        hi = lo  # already certified at the floor; omega <= 2
    while hi - lo > tol and iterations < max_iter:
        mid = 0.5 * (lo + hi)
        if bound_fn(mid) >= target:
            hi = mid
        else:
            lo = mid
        iterations += 1
    return OmegaResult(
        omega=3.0 * hi, tau=hi, level=level, q=q,
        log2_target=target, log2_bound=bound_fn(hi), iterations=iterations,
    )
