"""Scenario simulation: traffic generation, blind replay and KPI aggregation.

One run draws a Poisson stream of vehicles, lets each vehicle request a
periodic unicast link to its same-direction follower, schedules everything
from predicted speeds, and then replays the resulting grid against the
actual motion. A second "correct predictor" run over the same population
supplies the denominator of the successful transmission rate.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .config import fingerprint
from .model import (Direction, Kinematics, ScenarioConfig, Vehicle, position_at,
                    time_to_tti, tti_time)
from .scheduler import (Assignment, DropReason, Occurrence, Schedule, SchedulingRequest,
                        run_batches)


class OutcomeCategory(enum.Enum):
    SCHD_SUCCESSFUL = "schd_successful"
    SCHD_BUT_RX_IS_FAR = "schd_but_rx_is_far"
    SCHD_BUT_RX_REC_INTERF = "schd_but_rx_rec_interf"
    DROPD_RX_IS_FAR_INDEED = "dropd_rx_is_far_indeed"
    DROPD_DUE_RX_IS_FAR_BUT_NOT = "dropd_due_rx_is_far_but_not"
    DROPD_ELSE = "dropd_else"

    @property
    def scheduled(self) -> bool:
        return self in _SCHEDULED


_SCHEDULED = frozenset({OutcomeCategory.SCHD_SUCCESSFUL, OutcomeCategory.SCHD_BUT_RX_IS_FAR,
                        OutcomeCategory.SCHD_BUT_RX_REC_INTERF})

INDICATORS = tuple(c.value for c in OutcomeCategory) + (
    "admission_rate", "successful_transmission_rate", "avg_schedule_delay_s")


@dataclass(frozen=True)
class Outcome:
    occurrence: Occurrence
    category: OutcomeCategory
    delay_s: Optional[float] = None


@dataclass(frozen=True)
class KpiReport:
    counts: dict
    total_requested: int
    admitted: int
    withdrawn: int
    admission_rate: float
    successful_transmission_rate: float
    avg_schedule_delay_s: float
    fingerprint: str = ""
    seed: Optional[int] = None

    @property
    def shares(self) -> dict:
        return {c: self.counts[c] / self.total_requested for c in OutcomeCategory}

    def indicators(self) -> dict:
        """The nine scheduling KPIs keyed by their column names."""
        out = {c.value: s for c, s in self.shares.items()}
        out["admission_rate"] = self.admission_rate
        out["successful_transmission_rate"] = self.successful_transmission_rate
        out["avg_schedule_delay_s"] = self.avg_schedule_delay_s
        return out

    def as_dict(self) -> dict:
        out = self.indicators()
        for c in OutcomeCategory:
            out[f"n_{c.value}"] = self.counts[c]
        out["n_requested"] = self.total_requested
        out["n_admitted"] = self.admitted
        out["n_withdrawn"] = self.withdrawn
        return out


@dataclass
class ScenarioRun:
    vehicles: list
    requests: list
    schedule: Schedule
    outcomes: list
    withdrawn: int
    report: Optional[KpiReport] = None


def _rng_streams(seed: int, n: int) -> list:
    return [np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(seed).spawn(n)]


def _draw_speeds(model, rng, n: int) -> np.ndarray:
    if model.kind == "constant":
        return np.full(n, model.low)
    return rng.uniform(model.low, model.high, size=n)


def generate_vehicles(config: ScenarioConfig, seed: Optional[int] = None) -> list[Vehicle]:
    """Poisson arrivals over the horizon, each paired with its same-direction follower.

    Independent random streams drive arrivals, directions, actual speeds,
    predicted speeds and message periods, so changing the predicted-speed
    model leaves the rest of the population untouched.
    """
    seed = config.rng_seed if seed is None else seed
    arr_rng, dir_rng, act_rng, pred_rng, per_rng = _rng_streams(seed, 5)
    rate, horizon = config.vehicle_arrival_rate_per_s, config.sim_duration_s
    if rate <= 0:
        return []
    times = []
    t = 0.0
    chunk = max(16, int(rate * horizon + 6 * math.sqrt(rate * horizon)) + 16)
    while t <= horizon:
        gaps = arr_rng.exponential(1.0 / rate, size=chunk)
        for g in gaps:
            t += g
            if t > horizon:
                break
            times.append(t)
    n = len(times)
    forward = dir_rng.random(n) < 0.5
    actual = _draw_speeds(config.actual_speed_model, act_rng, n)
    predicted = _draw_speeds(config.predicted_speed_model, pred_rng, n)
    periods = [p for p, _ in config.message_period_choices]
    picks = per_rng.choice(len(periods), size=n, p=np.array(config.period_weights))

    # follower = next later arrival travelling the same way
    follower: dict[int, int] = {}
    last = {True: None, False: None}
    for i in range(n):
        key = bool(forward[i])
        if last[key] is not None:
            follower[last[key]] = i
        last[key] = i
    return [
        Vehicle(id=i,
                direction=Direction.FORWARD if forward[i] else Direction.REVERSE,
                entry_time_s=float(times[i]),
                actual_speed_mps=float(actual[i]),
                predicted_speed_mps=float(predicted[i]),
                message_period_s=periods[int(picks[i])],
                rx_target=follower.get(i))
        for i in range(n)
    ]


def with_correct_predictions(vehicles: Sequence[Vehicle]) -> list[Vehicle]:
    return [dataclasses.replace(v, predicted_speed_mps=v.actual_speed_mps) for v in vehicles]


def build_requests(vehicles: Sequence[Vehicle], config: ScenarioConfig) -> list[SchedulingRequest]:
    """One SR per paired vehicle, received as the transmitter reaches the DOCA."""
    by_id = {v.id: v for v in vehicles}
    requests = []
    for order, v in enumerate(sorted(vehicles, key=lambda v: (v.entry_time_s, v.id))):
        if v.rx_target is None:
            continue
        rx = by_id[v.rx_target]
        requests.append(SchedulingRequest(
            tx_vehicle_id=v.id,
            rx_vehicle_id=rx.id,
            direction=v.direction,
            tx_entry_time_s=v.entry_time_s,
            rx_entry_time_s=rx.entry_time_s,
            predicted_tx_speed_mps=v.predicted_speed_mps,
            predicted_rx_speed_mps=rx.predicted_speed_mps,
            message_period_s=v.message_period_s,
            arrival_order=order,
            receipt_time_s=v.entry_time_s,
        ))
    return requests


def exit_times(vehicles: Sequence[Vehicle], config: ScenarioConfig) -> dict[int, float]:
    return {v.id: v.exit_time_s(config.doca_length_m, Kinematics.ACTUAL) for v in vehicles}


def evaluate(schedule: Schedule, vehicles: Sequence[Vehicle],
             config: ScenarioConfig) -> tuple[list[Outcome], int]:
    """Classify every decided occurrence against the actual motion.

    Occurrences whose slot (the granted TTI, or the requested one for a
    drop) lies after the actual exit TTI of either party are withdrawn: the
    exit notification cancels them, so they are not requested transmissions.
    Returns the outcomes in decision order and the withdrawn count.
    """
    by_id = {v.id: v for v in vehicles}
    l, d, dt = config.doca_length_m, config.interference_range_m, config.tti_s
    exit_tti = {vid: time_to_tti(t, dt) for vid, t in exit_times(vehicles, config).items()}
    actual = Kinematics.ACTUAL

    def pos(vid: int, tti: int) -> float:
        return position_at(by_id[vid], tti_time(tti, dt), actual, l)

    cell_tx: dict[tuple, list] = {}

    def transmitters(tti: int, sub: int) -> list:
        """Actual positions of every transmitter in one RB, computed once per cell."""
        got = cell_tx.get((tti, sub))
        if got is None:
            got = cell_tx[(tti, sub)] = [(e.occurrence.key, pos(e.tx_id, tti))
                                         for e in schedule.cells[(tti, sub)]]
        return got

    outcomes = []
    withdrawn = 0
    for occ, decision in schedule.log:
        req = occ.request
        tx, rx = req.tx_vehicle_id, req.rx_vehicle_id
        slot = decision.rb.tti_index if isinstance(decision, Assignment) else occ.requested_tti
        if slot > exit_tti[tx] or slot > exit_tti[rx]:
            withdrawn += 1
            continue
        if tti_time(occ.requested_tti, dt) < config.warmup_s:
            continue
        if isinstance(decision, Assignment):
            if occ.key not in schedule.active:
                raise RuntimeError(f"occurrence {occ.key} released inside its pair's stay")
            tti, sub = decision.rb.tti_index, decision.rb.subchannel_index
            rx_pos = pos(rx, tti)
            if abs(pos(tx, tti) - rx_pos) > d:
                cat = OutcomeCategory.SCHD_BUT_RX_IS_FAR
            elif any(key != occ.key and abs(x - rx_pos) <= d for key, x in transmitters(tti, sub)):
                cat = OutcomeCategory.SCHD_BUT_RX_REC_INTERF
            else:
                cat = OutcomeCategory.SCHD_SUCCESSFUL
            outcomes.append(Outcome(occ, cat, decision.delay_ttis * dt))
        elif decision is DropReason.RX_PREDICTED_OUT_OF_RANGE:
            t = occ.requested_tti
            if abs(pos(tx, t) - pos(rx, t)) > d:
                outcomes.append(Outcome(occ, OutcomeCategory.DROPD_RX_IS_FAR_INDEED))
            else:
                outcomes.append(Outcome(occ, OutcomeCategory.DROPD_DUE_RX_IS_FAR_BUT_NOT))
        else:
            outcomes.append(Outcome(occ, OutcomeCategory.DROPD_ELSE))
    return outcomes, withdrawn


def admitted_count(outcomes: Sequence[Outcome]) -> int:
    return sum(1 for o in outcomes if o.category.scheduled)


def aggregate(outcomes: Sequence[Outcome], baseline_admitted_count: int, *,
              withdrawn: int = 0, fingerprint: str = "", seed: Optional[int] = None) -> KpiReport:
    if not outcomes:
        raise ValueError("no requested transmissions to aggregate")
    if baseline_admitted_count <= 0:
        raise ValueError("correct-predictor baseline admitted no transmissions")
    counts = {c: 0 for c in OutcomeCategory}
    delays = []
    for o in outcomes:
        counts[o.category] += 1
        if o.category.scheduled:
            delays.append(o.delay_s)
    total = len(outcomes)
    admitted = len(delays)
    return KpiReport(
        counts=counts,
        total_requested=total,
        admitted=admitted,
        withdrawn=withdrawn,
        admission_rate=admitted / total,
        successful_transmission_rate=counts[OutcomeCategory.SCHD_SUCCESSFUL] / baseline_admitted_count,
        avg_schedule_delay_s=math.fsum(delays) / admitted if admitted else math.nan,
        fingerprint=fingerprint,
        seed=seed,
    )


def simulate(config: ScenarioConfig, vehicles: Sequence[Vehicle]) -> ScenarioRun:
    """Schedule and replay one population; the report is filled in by the caller."""
    requests = build_requests(vehicles, config)
    involved = {r.tx_vehicle_id for r in requests} | {r.rx_vehicle_id for r in requests}
    exits = {vid: t for vid, t in exit_times(vehicles, config).items() if vid in involved}
    schedule, _ = run_batches(requests, config, exits)
    outcomes, withdrawn = evaluate(schedule, vehicles, config)
    return ScenarioRun(list(vehicles), requests, schedule, outcomes, withdrawn)


def run_scenario_detailed(config: ScenarioConfig, seed: Optional[int] = None) -> tuple[ScenarioRun, ScenarioRun]:
    seed = config.rng_seed if seed is None else seed
    fp = fingerprint(config)
    vehicles = generate_vehicles(config, seed)
    twin = simulate(config, with_correct_predictions(vehicles))
    baseline = admitted_count(twin.outcomes)
    twin.report = aggregate(twin.outcomes, baseline, withdrawn=twin.withdrawn,
                            fingerprint=fp, seed=seed)
    main = simulate(config, vehicles)
    main.report = aggregate(main.outcomes, baseline, withdrawn=main.withdrawn,
                            fingerprint=fp, seed=seed)
    return main, twin


def run_scenario(config: ScenarioConfig, seed: Optional[int] = None) -> tuple[KpiReport, KpiReport]:
    """KPI reports of the configured predictor and of its correct-predictor twin."""
    main, twin = run_scenario_detailed(config, seed)
    return main.report, twin.report
