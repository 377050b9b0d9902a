"""Exact single-photon simulation of nested Mach-Zehnder counterfactual setups."""

from .optics import (
    Absorber,
    BeamSplitter,
    Detector,
    Monitor,
    Network,
    PhaseShift,
    PhotonState,
    Slice,
    bs_unitary,
    detector_distribution,
    evolve,
    validate,
)
from .protocol import ChainedConfig, Fig1Config, build_chained, build_fig1

__version__ = "0.1.0"
