"""Desk-scale model of a BB84 link sourced by a weak SiGe emitter, co-existing
with a shortwave classical channel."""

from .bb84 import Basis, DistillationModel, PolState
from .experiments import (
    BACK_TO_BACK,
    FIBER,
    SystemModel,
    calibrate_all,
    closure_checks,
    compute_soax,
    rop_grid,
    run_back_to_back,
    run_coexistence_sweep,
)
from .photonics import PowerLevel, Wavelength

__version__ = "0.1.0"
