"""Joint spectrum-sensing / multichannel-MAC models for OSA networks.

Analytical stack: energy-detection ROC (``detection``), cooperative sensing
MAC with reporting overhead and fusion (``sensing``), multichannel MAC Markov
chains with throughput (``chain``), constrained optimization over sensing
parameters (``optimize``).  Validation stack: slot-level Monte Carlo
(``simulate``).  Orchestration: ``config`` and ``cli`` (the ``osa-bench``
entry point).
"""

__version__ = "0.1.0"

from .chain import (
    ChainModel,
    ControlDesign,
    ErrorModel,
    MacVariant,
    ModelKind,
    ThroughputReport,
    TrafficParams,
    build_chain,
    connection_setup_prob,
    enumerate_states,
    mac_throughput,
    overhead_ratio,
    stationary_distribution,
    termination_prob,
    throughput_macro,
    throughput_micro,
    transition_matrix,
    transition_row,
)
from .config import ExperimentConfig, parse_config
from .detection import (
    NodeDetectionProbs,
    PhyParams,
    detection_prob,
    false_alarm_prob,
    node_probs,
    threshold_for_false_alarm,
)
from .errors import (
    ChainBuildError,
    InfeasibleError,
    NumericalInstabilityError,
    StationarySolveError,
    ValidationError,
)
from .optimize import EvaluatedPoint, OptimizationResult, SearchGrid, evaluate_point, optimize
from .scene import RadioScene, large_network, small_network
from .sensing import (
    DetectionSummary,
    FusionConfig,
    GroupLayout,
    ReportingScheme,
    expected_report_bits,
    fixed_operating_point,
    group_fusion_prob,
    group_layout,
    network_detection_summary,
    sensing_cycles,
)
from .simulate import (
    MacSimResult,
    PuTrafficKind,
    PuTrafficModel,
    SensingSimResult,
    SimEstimate,
    batch_means,
    generate_pu_sequence,
    run_mac_sim,
    run_sensing_sim,
    switch_scheduler,
)
