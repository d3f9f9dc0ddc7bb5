"""Power-aware delay-optimal scheduling with mutual information accumulation."""

from .controller import FrameRecord, Trace, queue_update, run_frame, run_horizon
from .frame_solver import (
    Case,
    ValueTable,
    build_value_table_static,
    build_value_table_stochastic,
    case_split,
    choose_power,
    penalties,
    solve_frame,
)
from .model import (
    ChannelDistribution,
    ContractError,
    LinkModel,
    PacketLengthDistribution,
    PowerMenu,
    RateTable,
    SystemConfig,
    ValidationError,
    build_rate_table,
    kmin,
    lmax,
    load_config,
    shannon_rate,
    validate_model,
)
from .oracle import policy_stats, theta_star, verify_dp
from .simulator import Metrics, compute_metrics, simulate, sweep_v

__version__ = "0.1.0"
