"""IDNC-based device-to-device file dissemination: schedulers and simulation harness."""

from .clique import WeightedGraph, brute_force_clique, max_weight_clique
from .metrics import DeviceMetrics, RoundView, anticipated_completion, critical_set, initial_metrics, layer_index, record_round
from .net_model import (
    BASE_STATION,
    ModelError,
    NetworkState,
    Transmission,
    TransmissionPlan,
    apply_reception,
    connectivity_index,
    coverage_zone,
    expected_erasure,
    hearing_sets,
    is_instantly_decodable,
)
from .schedulers import (
    SchedulerKind,
    make_scheduler,
    plan_collision_free,
    plan_general,
    plan_pmp,
    plan_single_transmitter,
)
from .harness import ExperimentConfig, EpisodeResult, run_episode, run_round, run_sweep

__version__ = "0.1.0"
