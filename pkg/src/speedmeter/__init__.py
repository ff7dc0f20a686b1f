"""Frequency-domain simulator for reservoir-engineered optomechanical speed meters."""

from .freqsolve import DEFAULT_GRID, FrequencyGrid, NumericalFailure, TransferSet, commutator_defect, solve_transfer
from .scenarios import (
    ScenarioConfig,
    compare_meters,
    consistency_report,
    position_meter_system,
    speed_meter_system,
)
from .spectra import NoiseModel, ReadoutPlan, Squeezed, Vacuum, canonical_plan, conditional_psd, force_psd
from .sysmodel import SystemSpec, build_drift, eliminate_reservoir, nonreciprocity_defect

__version__ = "0.1.0"
