"""Twin-resolution hybrid beamforming for RIS-aided mmWave MIMO."""

from .config import ConfigError, SystemConfig, load_config, trial_rng
from .channel import ChannelRealization, draw_channel, upa_steering
from .hybrid import (
    HybridBeamformer,
    QuantizerSet,
    Resolution,
    SubArrayDesign,
    digital_precoder,
    greedy_subarray,
)
from .passive import CcmSettings, optimize_phases, project_discrete
from .metrics import MetricsRecord, PowerModel, Variant, rate, receive_snr, total_power
from .experiments import Method, SweepSpec, joint_design, run_baseline, run_sweep

__version__ = "0.1.0"
