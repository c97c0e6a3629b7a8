"""Bit error rate of time-hopping BPSK impulse radio over the IEEE 802.15.4a office LOS channel.

Two engines share one Eb/N0 axis: a Monte Carlo link simulator and a
Gaussian-approximation analysis whose interference variances are computed
by numerical quadrature.
"""
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.0.0"

from .analysis import LinkAnalysis, QuadratureSpec, analyze, interference_terms
from .channel import ChannelParams, ChannelRealization, generate_realization
from .config import RunConfig, load_config, load_preset
from .modem import DecisionComponents, SystemParams, decision_statistic, simulate_trial
from .montecarlo import BerPoint, StopRule, run_ber_point, run_curve
from .pulse import (
    AutocorrelationTable,
    DoubletAutocorrelation,
    PulseShape,
    autocorrelation,
    bandwidth_10db,
    default_pulse,
    make_gaussian_doublet,
)

__all__ = [
    "AutocorrelationTable",
    "BerPoint",
    "ChannelParams",
    "ChannelRealization",
    "DecisionComponents",
    "DoubletAutocorrelation",
    "LinkAnalysis",
    "PulseShape",
    "QuadratureSpec",
    "RunConfig",
    "StopRule",
    "SystemParams",
    "analyze",
    "autocorrelation",
    "bandwidth_10db",
    "decision_statistic",
    "default_pulse",
    "generate_realization",
    "interference_terms",
    "load_config",
    "load_preset",
    "make_gaussian_doublet",
    "run_ber_point",
    "run_curve",
    "simulate_trial",
]
