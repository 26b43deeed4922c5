"""cacheroute: joint in-network caching and request routing, simulated and solved.

A discrete-event simulator plus closed-form toolkit for a system where users
split requests between a cache-equipped node and an uncached backhaul path
(constant delay or M/M/1 queue), cross-validating every routing and caching
policy against its analytic model.
"""

from .analytic_models import (
    AlphaTwoLruParams,
    CheSolution,
    InfeasibleError,
    StationaryVector,
    alpha_two_lru_metrics,
    alpha_two_lru_model,
    alpha_two_lru_stationary,
    che_solve,
    dcr_caching_phase_delay,
    map_params_from_rate,
    optimal_delay_insensitive,
    optimal_delay_sensitive,
    optimal_split_p,
    optimize_alpha,
    optimize_id_cache_size,
    weighted_popularity,
)
from .cache_policies import (
    CacheOutcome,
    LruState,
    OutcomeKind,
    StaticState,
    TwoLruState,
    alpha_two_lru_access,
    lru_access,
    static_access,
    two_lru_access,
)
from .path_models import (
    DelayProfile,
    Mm1Config,
    Mm1Queue,
    UnstableQueueError,
    constant_path_delay,
    mm1_expected_delay,
    simulate_mm1,
)
from .routing_policies import (
    DcrController,
    OptimalPlan,
    RouteChoice,
    UserBelief,
    dcr_alpha_sensitive,
    greedy_route,
    optimal_policy,
    optimized_routing_plan,
)
from .sim_engine import MetricsWindow, RequestRecord, Scenario, SimResult, compare, run
from .workload import (
    Catalog,
    DriftConfig,
    UserProfile,
    apply_drift,
    next_request,
    zipf_popularity,
)

__version__ = "0.1.0"
