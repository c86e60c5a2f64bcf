"""Base-station pre-scheduler for periodic unicast messages inside the DOCA.

Scheduling requests (SRs) are collected in batches of ``sr_batch_period_s``.
Each request is expanded into periodic occurrences over the predicted stay
of the transmitter, and every occurrence is placed first-fit on the
TTI x subchannel grid using predicted positions only. An RB is granted when

* the receiver is predicted within ``d`` of the transmitter,
* neither vehicle already transmits or receives in that TTI,
* no transmitter already in the RB is within ``d`` of the receiver,
* no receiver already in the RB is within ``d`` of the transmitter.

If no subchannel fits, the occurrence is pushed to the next TTI, up to
``max_delay_s``; past that it is dropped.
"""

from __future__ import annotations

import bisect
import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Union

from .model import (GRID_EPS, Direction, RbIndex, ScenarioConfig, axis_position,
                    inside_doca, period_in_ttis, time_to_tti, tti_time)


class DropReason(enum.Enum):
    RX_PREDICTED_OUT_OF_RANGE = "RxPredictedOutOfRange"
    PREDICTED_INTERFERENCE_OR_HALF_DUPLEX_OR_DELAY = "PredictedInterferenceOrHalfDuplexOrDelay"


class Role(enum.Enum):
    TX = "tx"
    RX = "rx"


@dataclass(frozen=True)
class SchedulingRequest:
    tx_vehicle_id: int
    rx_vehicle_id: int
    direction: Direction
    tx_entry_time_s: float
    rx_entry_time_s: float
    predicted_tx_speed_mps: float
    predicted_rx_speed_mps: float
    message_period_s: float
    arrival_order: int
    receipt_time_s: float = 0.0

    def __post_init__(self):
        if self.tx_vehicle_id == self.rx_vehicle_id:
            raise ValueError("tx and rx vehicle must differ")
        if not (self.predicted_tx_speed_mps > 0 and self.predicted_rx_speed_mps > 0):
            raise ValueError("predicted speeds must be > 0")

    def tx_position(self, time_s: float, l: float) -> float:
        return axis_position(self.direction, self.tx_entry_time_s, self.predicted_tx_speed_mps,
                             time_s, l)

    def rx_position(self, time_s: float, l: float) -> float:
        return axis_position(self.direction, self.rx_entry_time_s, self.predicted_rx_speed_mps,
                             time_s, l)


@dataclass(frozen=True)
class Occurrence:
    request: SchedulingRequest
    sequence_number: int
    requested_tti: int
    key: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "key", (self.request.arrival_order, self.sequence_number))


@dataclass(frozen=True)
class Assignment:
    occurrence: Occurrence
    rb: RbIndex
    delay_ttis: int


@dataclass(frozen=True)
class CellEntry:
    occurrence: Occurrence
    tx_id: int
    rx_id: int
    tx_pos: float
    rx_pos: float


@dataclass(frozen=True)
class SaEntry:
    tti_index: int
    subchannel_index: int
    role: Role
    peer_id: int


Decision = Union[Assignment, DropReason]


class Cell:
    """Entries sharing one RB, with sorted tx and rx positions for range queries."""

    __slots__ = ("entries", "tx_sorted", "rx_sorted")

    def __init__(self):
        self.entries: list[CellEntry] = []
        self.tx_sorted: list[float] = []
        self.rx_sorted: list[float] = []

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    def add(self, entry: CellEntry) -> None:
        self.entries.append(entry)
        bisect.insort(self.tx_sorted, entry.tx_pos)
        bisect.insort(self.rx_sorted, entry.rx_pos)

    def discard(self, key: tuple) -> None:
        for i, e in enumerate(self.entries):
            if e.occurrence.key == key:
                del self.entries[i]
                del self.tx_sorted[bisect.bisect_left(self.tx_sorted, e.tx_pos)]
                del self.rx_sorted[bisect.bisect_left(self.rx_sorted, e.rx_pos)]
                return

    def admits(self, tx_pos: float, rx_pos: float, d: float) -> bool:
        """No stored tx within d of ``rx_pos`` and no stored rx within d of ``tx_pos``."""
        return not (_any_within(self.tx_sorted, rx_pos, d) or _any_within(self.rx_sorted, tx_pos, d))


def _any_within(sorted_pos: list, x: float, d: float) -> bool:
    i = bisect.bisect_left(sorted_pos, x)
    if i < len(sorted_pos) and sorted_pos[i] - x <= d:
        return True
    return i > 0 and x - sorted_pos[i - 1] <= d


class Schedule:
    """Radio grid state plus the append-only decision log.

    ``log`` keeps every decision in the order it was taken, including
    assignments that were later released by an exit notification.
    """

    def __init__(self, config: ScenarioConfig):
        self.config = config
        self.cells: dict[tuple, Cell] = {}
        self.activity: dict[tuple, tuple] = {}
        self.log: list[tuple[Occurrence, Decision]] = []
        self.active: dict[tuple, Assignment] = {}
        self.released: dict[tuple, Assignment] = {}
        self._by_vehicle: dict[int, set] = {}

    def register(self, vehicle_id: int) -> None:
        self._by_vehicle.setdefault(vehicle_id, set())

    def knows(self, vehicle_id: int) -> bool:
        return vehicle_id in self._by_vehicle

    def _require(self, vehicle_id: int) -> set:
        try:
            return self._by_vehicle[vehicle_id]
        except KeyError:
            raise KeyError(f"unknown vehicle id {vehicle_id}") from None

    def is_busy(self, vehicle_id: int, tti: int) -> bool:
        return (vehicle_id, tti) in self.activity

    def entries(self, rb: RbIndex) -> list[CellEntry]:
        return list(self.cells.get((rb.tti_index, rb.subchannel_index), ()))

    def record(self, occurrence: Occurrence, decision: Decision) -> None:
        """Append a decision and, for an assignment, occupy its RB."""
        self.log.append((occurrence, decision))
        if isinstance(decision, DropReason):
            return
        req = occurrence.request
        tti, sub = decision.rb.tti_index, decision.rb.subchannel_index
        l = self.config.doca_length_m
        t = tti_time(tti, self.config.tti_s)
        entry = CellEntry(occurrence, req.tx_vehicle_id, req.rx_vehicle_id,
                          req.tx_position(t, l), req.rx_position(t, l))
        cell = self.cells.get((tti, sub))
        if cell is None:
            cell = self.cells[(tti, sub)] = Cell()
        cell.add(entry)
        self.activity[(req.tx_vehicle_id, tti)] = (sub, Role.TX, occurrence.key)
        self.activity[(req.rx_vehicle_id, tti)] = (sub, Role.RX, occurrence.key)
        self.active[occurrence.key] = decision
        self._by_vehicle.setdefault(req.tx_vehicle_id, set()).add(occurrence.key)
        self._by_vehicle.setdefault(req.rx_vehicle_id, set()).add(occurrence.key)

    def _remove(self, assignment: Assignment) -> None:
        occ = assignment.occurrence
        req = occ.request
        tti, sub = assignment.rb.tti_index, assignment.rb.subchannel_index
        cell = self.cells[(tti, sub)]
        cell.discard(occ.key)
        if not cell:
            del self.cells[(tti, sub)]
        del self.activity[(req.tx_vehicle_id, tti)]
        del self.activity[(req.rx_vehicle_id, tti)]
        del self.active[occ.key]
        self._by_vehicle[req.tx_vehicle_id].discard(occ.key)
        self._by_vehicle[req.rx_vehicle_id].discard(occ.key)
        self.released[occ.key] = assignment

    def assignments_of(self, vehicle_id: int) -> list[Assignment]:
        keys = self._require(vehicle_id)
        return sorted((self.active[k] for k in keys),
                      key=lambda a: (a.rb.tti_index, a.rb.subchannel_index))

    def drops(self) -> list[tuple[Occurrence, DropReason]]:
        return [(o, d) for o, d in self.log if isinstance(d, DropReason)]


def generate_occurrences(request: SchedulingRequest, config: ScenarioConfig,
                         predicted_exit_tti: Optional[int] = None) -> list[Occurrence]:
    """Periodic occurrences while the transmitter is predicted inside the DOCA."""
    step = period_in_ttis(request.message_period_s, config.tti_s)
    if step is None:
        raise ValueError(f"period {request.message_period_s} is not a multiple of the TTI")
    l = config.doca_length_m
    first = time_to_tti(request.tx_entry_time_s, config.tti_s)
    if predicted_exit_tti is None:
        exit_time = request.tx_entry_time_s + l / request.predicted_tx_speed_mps
        # last TTI whose instant is still within the predicted stay
        predicted_exit_tti = math.floor(exit_time / config.tti_s + GRID_EPS)
    out = []
    n = 0
    tti = first
    while tti <= predicted_exit_tti:
        if not inside_doca(request.tx_position(tti_time(tti, config.tti_s), l), l):
            break
        out.append(Occurrence(request, n, tti))
        n += 1
        tti += step
    if not out:
        # entry TTI is always granted, even for a degenerate stay
        out.append(Occurrence(request, 0, first))
    return out


def try_assign(occurrence: Occurrence, schedule: Schedule,
               config: ScenarioConfig) -> Decision:
    """First-fit placement of one occurrence; does not modify ``schedule``."""
    req = occurrence.request
    l = config.doca_length_m
    d = config.interference_range_m
    dt = config.tti_s
    tx_id, rx_id = req.tx_vehicle_id, req.rx_vehicle_id
    start = occurrence.requested_tti
    t0 = tti_time(start, dt)
    if abs(req.tx_position(t0, l) - req.rx_position(t0, l)) > d:
        return DropReason.RX_PREDICTED_OUT_OF_RANGE
    cells = schedule.cells
    activity = schedule.activity
    n_sub = config.subchannel_count
    bisect_left = bisect.bisect_left
    forward = req.direction is Direction.FORWARD
    tx_e, tx_v = req.tx_entry_time_s, req.predicted_tx_speed_mps
    rx_e, rx_v = req.rx_entry_time_s, req.predicted_rx_speed_mps
    for tti in range(start, start + config.max_delay_ttis + 1):
        if (tx_id, tti) in activity or (rx_id, tti) in activity:
            continue
        t = tti * dt
        # same arithmetic as axis_position, inlined
        if forward:
            tx_pos = tx_v * (t - tx_e)
            rx_pos = rx_v * (t - rx_e)
        else:
            tx_pos = l - tx_v * (t - tx_e)
            rx_pos = l - rx_v * (t - rx_e)
        if abs(tx_pos - rx_pos) > d:
            continue
        for sub in range(n_sub):
            cell = cells.get((tti, sub))
            if cell is None:
                return Assignment(occurrence, RbIndex(tti, sub), tti - start)
            # inlined Cell.admits: hot path
            txs = cell.tx_sorted
            i = bisect_left(txs, rx_pos)
            if (i < len(txs) and txs[i] - rx_pos <= d) or (i > 0 and rx_pos - txs[i - 1] <= d):
                continue
            rxs = cell.rx_sorted
            i = bisect_left(rxs, tx_pos)
            if (i < len(rxs) and rxs[i] - tx_pos <= d) or (i > 0 and tx_pos - rxs[i - 1] <= d):
                continue
            return Assignment(occurrence, RbIndex(tti, sub), tti - start)
    return DropReason.PREDICTED_INTERFERENCE_OR_HALF_DUPLEX_OR_DELAY


def schedule_request(request: SchedulingRequest, schedule: Schedule,
                     config: ScenarioConfig) -> list[Decision]:
    schedule.register(request.tx_vehicle_id)
    schedule.register(request.rx_vehicle_id)
    decisions = []
    for occ in generate_occurrences(request, config):
        decision = try_assign(occ, schedule, config)
        schedule.record(occ, decision)
        decisions.append(decision)
    return decisions


def release_on_exit(schedule: Schedule, vehicle_id: int, actual_exit_time_s: float) -> list[Assignment]:
    """Free every RB of ``vehicle_id`` strictly after its exit TTI; return what was freed."""
    keys = schedule._require(vehicle_id)
    cutoff = time_to_tti(actual_exit_time_s, schedule.config.tti_s)
    doomed = [schedule.active[k] for k in keys if schedule.active[k].rb.tti_index > cutoff]
    doomed.sort(key=lambda a: (a.rb.tti_index, a.rb.subchannel_index))
    for a in doomed:
        schedule._remove(a)
    return doomed


def emit_sa(schedule: Schedule, vehicle_id: int) -> list[SaEntry]:
    """Scheduling assignment for one vehicle: its cells ordered by TTI."""
    out = []
    for a in schedule.assignments_of(vehicle_id):
        req = a.occurrence.request
        if req.tx_vehicle_id == vehicle_id:
            out.append(SaEntry(a.rb.tti_index, a.rb.subchannel_index, Role.TX, req.rx_vehicle_id))
        else:
            out.append(SaEntry(a.rb.tti_index, a.rb.subchannel_index, Role.RX, req.tx_vehicle_id))
    return out


def batch_index(receipt_time_s: float, sr_batch_period_s: float) -> int:
    return int(math.floor(receipt_time_s / sr_batch_period_s + GRID_EPS))


def run_batches(requests: Iterable[SchedulingRequest], config: ScenarioConfig,
                exit_times: Optional[Mapping[int, float]] = None) -> tuple[Schedule, list]:
    """Process requests batch by batch, interleaving exit notifications.

    A batch collecting receipts in ``[k, k+1) * sr_batch_period_s`` is
    decided at its closing instant. Exit notifications (``exit_times``,
    vehicle id -> actual exit time) that arrive no later than that instant
    are applied first, so the freed RBs are visible to the batch.
    """
    schedule = Schedule(config)
    requests = sorted(requests, key=lambda r: (batch_index(r.receipt_time_s, config.sr_batch_period_s),
                                               r.arrival_order))
    for r in requests:
        schedule.register(r.tx_vehicle_id)
        schedule.register(r.rx_vehicle_id)
    events = []
    for r in requests:
        k = batch_index(r.receipt_time_s, config.sr_batch_period_s)
        events.append(((k + 1) * config.sr_batch_period_s, 1, k, r.arrival_order, r))
    for vid, t in (exit_times or {}).items():
        events.append((t, 0, 0, vid, None))
    events.sort(key=lambda e: e[:4])
    for _, kind, _, ident, req in events:
        if kind == 0:
            if schedule.knows(ident):
                release_on_exit(schedule, ident, exit_times[ident])
        else:
            schedule_request(req, schedule, config)
    return schedule, schedule.drops()


def validate_schedule(schedule: Schedule, config: Optional[ScenarioConfig] = None) -> list[str]:
    """Post-hoc check of the grid; returns human-readable violations (empty if valid)."""
    config = config or schedule.config
    d = config.interference_range_m
    l = config.doca_length_m
    violations = []
    seen: dict[tuple, tuple] = {}
    for (tti, sub), cell in schedule.cells.items():
        if sub >= config.subchannel_count or sub < 0:
            violations.append(f"subchannel {sub} outside [0, {config.subchannel_count})")
        for e in cell:
            for vid in (e.tx_id, e.rx_id):
                if (vid, tti) in seen:
                    violations.append(f"vehicle {vid} active twice in TTI {tti}")
                seen[(vid, tti)] = (sub, e.occurrence.key)
            if abs(e.tx_pos - e.rx_pos) > d:
                violations.append(f"TTI {tti} sub {sub}: rx {e.rx_id} predicted beyond d of tx {e.tx_id}")
            a = schedule.active[e.occurrence.key]
            if a.delay_ttis < 0 or a.delay_ttis > config.max_delay_ttis:
                violations.append(f"occurrence {e.occurrence.key}: delay {a.delay_ttis} TTIs")
            req = e.occurrence.request
            t = tti_time(tti, config.tti_s)
            if (req.tx_position(t, l), req.rx_position(t, l)) != (e.tx_pos, e.rx_pos):
                violations.append(f"occurrence {e.occurrence.key}: stale cell positions")
        for i, a in enumerate(cell.entries):
            for b in cell.entries[i + 1:]:
                if abs(a.rx_pos - b.tx_pos) <= d or abs(b.rx_pos - a.tx_pos) <= d:
                    violations.append(
                        f"TTI {tti} sub {sub}: entries {a.occurrence.key} and {b.occurrence.key} within d")
    return violations
