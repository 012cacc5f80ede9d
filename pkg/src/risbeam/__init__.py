"""Reflect-assisted downlink joint sensing/communication beampattern design:
channel and scenario generation, clustered power-domain rate models, the
alternating transmit/reflect optimizers, and Monte-Carlo experiment drivers.
"""

from .config import (PACKAGE_VERSION, SystemConfig, config_hash, load_config,
                     load_profile)
from .channels import (ChannelSet, ScenarioGeometry, build_scenario, pathloss,
                       rician_channel, seed_streams, steering_vector)
from .errors import (ConfigError, InfeasibleError, SolverError, StallError,
                     StateError)
from .rates import (BeamState, RateReport, effective_gain, qos_satisfied,
                    rate_f_at_f, rate_f_at_n, rate_far, rate_n, rate_report)
from .sensing import (beampattern_gain, desired_beampattern, gain_profile,
                      illumination_heatmap, make_angle_grid, min_gain)
from .active import ActiveResult, algorithm1, extract_beamformers
from .passive import (PassiveResult, algorithm2, extract_phases,
                      update_epsilon)
from .driver import (BaselineResult, JointResult, UserChannels, algorithm3,
                     baseline_ris_isac, flatten_for_baseline, verify_joint)
from .experiments import (ExperimentResult, cli_beampattern, cli_heatmap,
                          cli_sweep_m, run_baseline_trial, run_noma_trial,
                          trial_seeds)

__version__ = PACKAGE_VERSION

__all__ = [
    "ActiveResult", "BaselineResult", "BeamState", "ChannelSet",
    "ConfigError", "ExperimentResult", "InfeasibleError", "JointResult",
    "PassiveResult", "RateReport", "ScenarioGeometry", "SolverError",
    "StallError", "StateError", "SystemConfig", "UserChannels",
    "algorithm1", "algorithm2", "algorithm3", "baseline_ris_isac",
    "beampattern_gain", "build_scenario", "cli_beampattern", "cli_heatmap",
    "cli_sweep_m", "config_hash", "desired_beampattern", "effective_gain",
    "extract_beamformers", "extract_phases", "flatten_for_baseline",
    "gain_profile", "illumination_heatmap", "load_config", "load_profile",
    "make_angle_grid", "min_gain", "pathloss", "qos_satisfied",
    "rate_f_at_f", "rate_f_at_n", "rate_far", "rate_n", "rate_report",
    "rician_channel", "run_baseline_trial", "run_noma_trial", "seed_streams",
    "steering_vector", "trial_seeds", "update_epsilon", "verify_joint",
]
