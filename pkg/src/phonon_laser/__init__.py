"""Simulation and thermodynamic analysis of a heat-driven four-level phonon laser."""
from .kernels import BACKEND
from .model import HBAR, K_B, PRESETS, ModelParams, preset

__all__ = ["BACKEND", "HBAR", "K_B", "PRESETS", "ModelParams", "preset"]
__version__ = "0.1.0"
