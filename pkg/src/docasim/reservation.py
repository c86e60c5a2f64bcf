"""Reserved-pool sizing for ad hoc (event-triggered) safety traffic.

Ad hoc arrivals inside one collision domain are Poisson with rate
``lambda = gamma * min(2d, l) * lambda_adhoc``. With ``R`` reserved resource
blocks the pool overloads when the active ad hoc services ``A`` exceed ``R``,
and the reported reliability is the Poisson CDF evaluated at ``R - 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .model import ScenarioConfig

# Above this rate exp(-lam) underflows double precision.
_LOG_SPACE_THRESHOLD = 700.0


class CapacityError(ValueError):
    pass


@dataclass(frozen=True)
class ReservationQuery:
    vehicle_density_per_m: float
    doca_length_m: float
    interference_range_m: float
    adhoc_rate_per_vehicle_per_m: float
    target_reliability: float

    def __post_init__(self):
        if self.vehicle_density_per_m < 0:
            raise ValueError("vehicle density must be >= 0")
        if not (self.doca_length_m > 0 and self.interference_range_m > 0):
            raise ValueError("doca length and interference range must be > 0")
        if self.adhoc_rate_per_vehicle_per_m < 0:
            raise ValueError("ad hoc rate must be >= 0")
        _check_target(self.target_reliability)


@dataclass(frozen=True)
class ReservationResult:
    lam: float
    required_rb: int
    achieved_reliability: float


@dataclass(frozen=True)
class MonteCarloEstimate:
    reliability: float
    standard_error: float
    trials: int


def _check_target(target: float) -> None:
    if not 0.0 < target < 1.0:
        raise ValueError(f"target reliability must lie in (0, 1), got {target}")


def adhoc_rate(gamma: float, d: float, l: float, lambda_adhoc: float) -> float:
    """Ad hoc arrival rate in a single collision domain.

    A DOCA no longer than ``2d`` is one collision domain and contributes its
    whole length; a longer one is capped at ``2d`` because distant domains
    reuse the same resource blocks.
    """
    if gamma < 0 or lambda_adhoc < 0:
        raise ValueError("gamma and lambda_adhoc must be >= 0")
    if not (d > 0 and l > 0):
        raise ValueError("d and l must be > 0")
    return gamma * min(2.0 * d, l) * lambda_adhoc


def reliability(R: int, lam: float) -> float:
    """P[Poisson(lam) <= R - 1], accumulated term by term."""
    if R < 0 or lam < 0:
        raise ValueError("R and lam must be >= 0")
    if R == 0:
        return 0.0
    if lam > _LOG_SPACE_THRESHOLD:
        log_lam = math.log(lam)
        log_term = -lam
        acc = log_term
        for k in range(1, R):
            log_term += log_lam - math.log(k)
            hi, lo = max(acc, log_term), min(acc, log_term)
            acc = hi + math.log1p(math.exp(lo - hi))
        return min(1.0, math.exp(acc))
    term = math.exp(-lam)
    total = term
    for k in range(1, R):
        term *= lam / k
        total += term
    return min(1.0, total)


def required_reservation(lam: float, target: float) -> int:
    """Smallest R whose reliability reaches ``target``."""
    if lam < 0:
        raise ValueError("lam must be >= 0")
    _check_target(target)
    if lam > _LOG_SPACE_THRESHOLD:
        log_target = math.log(target)
        log_lam = math.log(lam)
        log_term = -lam
        acc = log_term
        R = 1
        while acc < log_target:
            log_term += log_lam - math.log(R)
            hi, lo = max(acc, log_term), min(acc, log_term)
            acc = hi + math.log1p(math.exp(lo - hi))
            R += 1
        return R
    # incremental version of reliability(): one pass over the CDF
    term = math.exp(-lam)
    total = 0.0
    R = 0
    while total < target:
        if R > 0:
            term *= lam / R
        total += term
        R += 1
        if term == 0.0 and R > lam:
            break
    return R


def reserve(query: ReservationQuery) -> ReservationResult:
    lam = adhoc_rate(query.vehicle_density_per_m, query.interference_range_m,
                     query.doca_length_m, query.adhoc_rate_per_vehicle_per_m)
    R = required_reservation(lam, query.target_reliability)
    return ReservationResult(lam, R, reliability(R, lam))


def check_capacity(required_rb: int, config: ScenarioConfig) -> None:
    """Reservation must leave room for pre-scheduled traffic: R < N."""
    if required_rb >= config.cell_capacity_rb:
        raise CapacityError(
            f"reservation of {required_rb} RBs does not fit capacity "
            f"N={config.cell_capacity_rb} (need R < N)")


def overload(R: int, A: int, config: Optional[ScenarioConfig] = None) -> bool:
    """True iff the active ad hoc services outnumber the reserved blocks."""
    if R < 0 or A < 0:
        raise ValueError("R and A must be >= 0")
    if config is not None:
        check_capacity(R, config)
    return R < A


def monte_carlo_reliability(R: int, lam: float, trials: int, seed: int) -> MonteCarloEstimate:
    """Empirical P[Poisson(lam) < R] under a perfect (non-overlapping) allocation.

    The standard error uses the half-count smoothed proportion so that an
    all-success (or all-failure) run still reports a nonzero uncertainty.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if R < 0 or lam < 0:
        raise ValueError("R and lam must be >= 0")
    rng = np.random.Generator(np.random.Philox(seed))
    draws = rng.poisson(lam, size=trials)
    hits = int(np.count_nonzero(draws < R))
    p_hat = hits / trials
    p_smooth = (hits + 0.5) / (trials + 1.0)
    se = math.sqrt(p_smooth * (1.0 - p_smooth) / trials)
    return MonteCarloEstimate(p_hat, se, trials)


@dataclass(frozen=True)
class ReservationRow:
    doca_length_m: float
    vehicle_density_per_m: float
    target_reliability: float
    interference_range_m: float
    adhoc_rate_per_vehicle_per_m: float
    lam: float
    required_rb: int
    achieved_reliability: float

    def as_dict(self) -> dict:
        return {
            "l": self.doca_length_m,
            "gamma": self.vehicle_density_per_m,
            "rel_target": self.target_reliability,
            "d": self.interference_range_m,
            "lambda_adhoc": self.adhoc_rate_per_vehicle_per_m,
            "lambda": self.lam,
            "R": self.required_rb,
            "rel_achieved": self.achieved_reliability,
        }


def reservation_sweep(l_values: Sequence[float], gamma_values: Sequence[float],
                      targets: Sequence[float], d: float,
                      lambda_adhoc: float) -> list[ReservationRow]:
    """Required R over the l x gamma x target grid, rows in input order."""
    for name, values in (("l", l_values), ("gamma", gamma_values), ("rel_target", targets)):
        if len(values) == 0:
            raise ValueError(f"empty sweep axis: {name}")
    rows = []
    for l in l_values:
        for gamma in gamma_values:
            for target in targets:
                res = reserve(ReservationQuery(gamma, l, d, lambda_adhoc, target))
                rows.append(ReservationRow(l, gamma, target, d, lambda_adhoc,
                                           res.lam, res.required_rb, res.achieved_reliability))
    return rows
