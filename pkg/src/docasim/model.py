"""Domain types, DOCA geometry, constant-speed kinematics and grid arithmetic.

Vehicles are points on a single highway axis. Forward traffic enters the
delimited out-of-coverage area (DOCA) at x = 0 and moves towards +x; reverse
traffic enters at x = l and moves towards -x. Positions are defined on the
whole line, so a vehicle that has not entered yet sits outside [0, l].
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

# Tolerance used when snapping a float time to the TTI grid.
GRID_EPS = 1e-9


class ConfigError(ValueError):
    """Invalid scenario parameter; ``key`` names the offending field."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key
        self.message = message


class Direction(enum.Enum):
    FORWARD = "forward"
    REVERSE = "reverse"


class Kinematics(enum.Enum):
    ACTUAL = "actual"
    PREDICTED = "predicted"


@dataclass(frozen=True)
class SpeedModel:
    """Constant-speed draw: either one fixed value or uniform on [low, high]."""

    kind: str
    low: float
    high: float

    @classmethod
    def constant(cls, v: float) -> "SpeedModel":
        return cls("constant", float(v), float(v))

    @classmethod
    def uniform(cls, low: float, high: float) -> "SpeedModel":
        return cls("uniform", float(low), float(high))

    def __post_init__(self):
        if self.kind not in ("constant", "uniform"):
            raise ValueError(f"unknown speed model kind {self.kind!r}")
        if not (self.low > 0 and self.low <= self.high):
            raise ValueError(f"speed bounds must satisfy 0 < low <= high, got {self.low}, {self.high}")
        if self.kind == "constant" and self.low != self.high:
            raise ValueError("constant speed model needs low == high")

    def sample(self, rng) -> float:
        if self.kind == "constant":
            return self.low
        return float(rng.uniform(self.low, self.high))

    @property
    def mean(self) -> float:
        return 0.5 * (self.low + self.high)

    def label(self) -> str:
        if self.kind == "constant":
            return f"constant:{self.low:g}"
        return f"uniform:{self.low:g}-{self.high:g}"

    @classmethod
    def parse(cls, text) -> "SpeedModel":
        """Accept ``30``, ``constant:30``, ``uniform:20-30`` or a mapping."""
        if isinstance(text, SpeedModel):
            return text
        if isinstance(text, dict):
            kind = text.get("kind")
            needed = {"constant": ("v",), "uniform": ("low", "high")}.get(kind, ())
            missing = [k for k in needed if k not in text]
            if missing:
                raise ValueError(f"{kind} speed model needs field {missing[0]!r}")
            if kind == "constant":
                return cls.constant(text["v"])
            if kind == "uniform":
                return cls.uniform(text["low"], text["high"])
            raise ValueError(f"unknown speed model kind {kind!r}")
        if isinstance(text, (int, float)) and not isinstance(text, bool):
            return cls.constant(text)
        s = str(text).strip()
        kind, _, rest = s.partition(":")
        if not rest:
            return cls.constant(float(s))
        if kind == "constant":
            return cls.constant(float(rest))
        if kind == "uniform":
            lo, _, hi = rest.partition("-")
            return cls.uniform(float(lo), float(hi))
        raise ValueError(f"cannot parse speed model {text!r}")

    def to_dict(self) -> dict:
        if self.kind == "constant":
            return {"kind": "constant", "v": self.low}
        return {"kind": "uniform", "low": self.low, "high": self.high}


def _default_periods() -> tuple:
    return ((0.25, 1.0), (0.5, 1.0), (0.75, 1.0))


@dataclass(frozen=True)
class ScenarioConfig:
    """System-level parameters of one scenario."""

    doca_length_m: float = 1000.0
    interference_range_m: float = 75.0
    vehicle_arrival_rate_per_s: float = 3.0
    tti_s: float = 0.25
    subchannel_width_hz: float = 180e3
    subchannel_count: int = 5
    max_delay_s: float = 1.0
    sr_batch_period_s: float = 0.3
    adhoc_rate_per_vehicle_per_m: float = 0.05
    cell_capacity_rb: int = 100
    # (period_s, relative weight) pairs
    message_period_choices: tuple = field(default_factory=_default_periods)
    actual_speed_model: SpeedModel = SpeedModel.constant(30.0)
    predicted_speed_model: SpeedModel = SpeedModel.constant(30.0)
    sim_duration_s: float = 300.0
    rng_seed: int = 0
    warmup_s: float = 0.0

    def __post_init__(self):
        positive = ("doca_length_m", "interference_range_m", "tti_s", "sr_batch_period_s",
                    "sim_duration_s")
        for key in positive:
            if not getattr(self, key) > 0:
                raise ConfigError(key, "must be > 0")
        nonneg = ("vehicle_arrival_rate_per_s", "max_delay_s", "adhoc_rate_per_vehicle_per_m",
                  "subchannel_width_hz", "warmup_s")
        for key in nonneg:
            if not getattr(self, key) >= 0:
                raise ConfigError(key, "must be >= 0")
        if int(self.subchannel_count) != self.subchannel_count or self.subchannel_count < 1:
            raise ConfigError("subchannel_count", "must be an integer >= 1")
        if int(self.cell_capacity_rb) != self.cell_capacity_rb or self.cell_capacity_rb < 1:
            raise ConfigError("cell_capacity_rb", "must be an integer >= 1")
        if not self.message_period_choices:
            raise ConfigError("message_period_choices", "must not be empty")
        for period, weight in self.message_period_choices:
            if period_in_ttis(period, self.tti_s) is None:
                raise ConfigError("message_period_choices",
                                  f"period not a multiple of TTI: {period}")
            if not weight > 0:
                raise ConfigError("message_period_choices", f"weight must be > 0: {weight}")
        for key in ("actual_speed_model", "predicted_speed_model"):
            if not isinstance(getattr(self, key), SpeedModel):
                raise ConfigError(key, "must be a SpeedModel")

    @property
    def max_delay_ttis(self) -> int:
        return int(math.floor(self.max_delay_s / self.tti_s + GRID_EPS))

    @property
    def period_weights(self) -> tuple:
        total = sum(w for _, w in self.message_period_choices)
        return tuple(w / total for _, w in self.message_period_choices)


def period_in_ttis(period_s: float, tti_s: float) -> Optional[int]:
    """Return period / tti if it is a positive integer (within 1e-9), else None."""
    ratio = period_s / tti_s
    k = round(ratio)
    if k < 1 or abs(ratio - k) > GRID_EPS * max(1.0, ratio):
        return None
    return int(k)


@dataclass(frozen=True)
class Vehicle:
    id: int
    direction: Direction
    entry_time_s: float
    actual_speed_mps: float
    predicted_speed_mps: float
    message_period_s: float
    rx_target: Optional[int] = None

    def __post_init__(self):
        if not (self.actual_speed_mps > 0 and self.predicted_speed_mps > 0):
            raise ValueError(f"vehicle {self.id}: speeds must be > 0")
        if self.rx_target == self.id:
            raise ValueError(f"vehicle {self.id}: cannot pair with itself")

    def speed(self, kind: Kinematics) -> float:
        return self.actual_speed_mps if kind is Kinematics.ACTUAL else self.predicted_speed_mps

    def exit_time_s(self, doca_length_m: float, kind: Kinematics = Kinematics.ACTUAL) -> float:
        return self.entry_time_s + doca_length_m / self.speed(kind)


@dataclass(frozen=True, order=True)
class RbIndex:
    tti_index: int
    subchannel_index: int


def axis_position(direction: Direction, entry_time_s: float, speed_mps: float,
                  time_s: float, doca_length_m: float) -> float:
    travelled = speed_mps * (time_s - entry_time_s)
    if direction is Direction.FORWARD:
        return travelled
    return doca_length_m - travelled


def position_at(vehicle: Vehicle, time_s: float, kind: Kinematics,
                doca_length_m: float) -> float:
    """Signed axis position of ``vehicle`` at ``time_s`` under actual or predicted speed."""
    return axis_position(vehicle.direction, vehicle.entry_time_s, vehicle.speed(kind),
                         time_s, doca_length_m)


def within_range(pos_a_m: float, pos_b_m: float, d_m: float) -> bool:
    return abs(pos_a_m - pos_b_m) <= d_m


def inside_doca(pos_m: float, l_m: float) -> bool:
    return 0.0 <= pos_m <= l_m


def time_to_tti(time_s: float, tti_s: float) -> int:
    """Smallest n with n * tti_s >= time_s, tolerant to float noise on exact multiples."""
    n = math.ceil(time_s / tti_s - GRID_EPS)
    return max(int(n), 0)


def tti_time(n: int, tti_s: float) -> float:
    return n * tti_s
