"""Budget-pacing bid optimization for repeated second-price auctions.

Click maximization under a periodic budget: exact finite-horizon planning
against a known price distribution, censored-data estimation of an unknown
one, and a simulation harness benchmarking learning policies against
offline optima.
"""

from .censored import (
    CensoredSample,
    CensorKind,
    ObservationLog,
    TurnbullResult,
    log_likelihood,
    product_limit,
    turnbull,
)
from .distribution import PricePmf, empirical_pmf, make_family, point_mass
from .experiment import (
    ConfigError,
    ExperimentConfig,
    ExperimentError,
    ExperimentResult,
    PolicySpec,
    echo_config,
    emit_reports,
    load_config,
    parse_config,
    run_experiment,
)
from .harness import (
    AuctionRecord,
    CurvePoint,
    PeriodLog,
    competitive_ratio,
    convergence_curve,
    cumulative_ratio_series,
    offline_optimal,
    paired_ttest,
    run_simulation,
)
from .market import (
    AuctionOutcome,
    ReplayExhausted,
    ReplayMarket,
    ReplaySequence,
    StochasticMarket,
    load_replay,
    resolve_auction,
)
from .policies import (
    AuctionFeedback,
    BidPolicy,
    BudgetSmoothing,
    FixedPrice,
    FixedPriceSearch,
    GreedyProductLimit,
    LuekerLearn,
    PolicyContractError,
    QLearning,
    available_policies,
    canonical_policy_name,
    make_policy,
)
from .value_iteration import (
    CalibrationResult,
    ValueTable,
    calibrate_budget,
    lueker_threshold,
    solve,
)

__version__ = "0.1.0"
