"""Radio-resource reservation and prediction-based pre-scheduling for V2V
traffic inside a delimited out-of-coverage area (DOCA)."""

from .config import dump_config, fingerprint, parse_config
from .model import (ConfigError, Direction, Kinematics, RbIndex, ScenarioConfig, SpeedModel,
                    Vehicle, inside_doca, position_at, time_to_tti, tti_time, within_range)
from .reservation import (adhoc_rate, monte_carlo_reliability, overload, reliability,
                          required_reservation, reservation_sweep)
from .scheduler import (DropReason, Schedule, SchedulingRequest, emit_sa, generate_occurrences,
                        release_on_exit, run_batches, try_assign, validate_schedule)
from .sim import KpiReport, OutcomeCategory, aggregate, evaluate, run_scenario

__version__ = "0.1.0"
