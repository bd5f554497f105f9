"""Deterministic simulation laboratory for dynamic pricing of HOT lanes.

Point-queue traffic dynamics, logit lane choice, three pricing controllers
(a VOT-estimating feedback controller and two baselines), and the analysis
machinery for their convergence behavior.
"""

from .analysis import (
    ConstantDemandScenario,
    ConvergenceReport,
    analytic_optimal_price,
    classify_convergence,
    classify_trajectory,
    exponential_tail,
    find_phase_boundary,
    gaussian_tail,
    loop_gain_rate,
    run_approximate,
    step_approximate,
)
from .choice import (
    BehaviorParams,
    NoiseSpec,
    induced_residual_capacity,
    paying_demand,
    paying_share,
    sample_eta,
)
from .config import (
    IntegralTollSpec,
    ScenarioConfig,
    SelfLearningSpec,
    VotControllerSpec,
    config_from_mapping,
    load_config,
    parse_config_text,
)
from .engine import (
    DemandProfile,
    SummaryMetrics,
    SystemState,
    Trajectory,
    demand_at,
    run_closed_loop,
    summarize,
)
from .errors import (
    BoundaryNotBracketedError,
    ConfigError,
    HotSimError,
    PriceUndefinedError,
    ScenarioAssumptionError,
)
from .pricing import (
    IntegralTollController,
    SelfLearningController,
    StepObservation,
    VotFeedbackController,
)
from .traffic import (
    Capacities,
    QueueState,
    TimingState,
    queuing_times,
    residual_capacity,
    step_point_queues,
    throughputs,
)

__version__ = "0.1.0"
