"""Mean-field dynamics and phase analysis of three spin species coupled to a damped cavity."""
__version__ = "0.1.0"

from ._core import BACKEND
from .model import ModelParams, SystemState, rhs_adiabatic, rhs_full
from .integrate import IntegratorConfig, Mode, Trajectory, integrate
from .stationary import FixedPoint, Phase, PhaseLabel, find_all_stationary, stationary_phase
from .stability import analyze, detect_ep, lambda_c, phi_c
from .dynamics import AttractorVerdict, Kind, classify_attractor, run_and_classify
from .landscape import ground_phase, minimize_energy
from .compensate import CompensationPlan, make_plan, params_from_plan
from .sweep import SweepSpec, resume, sweep

__all__ = [
    "__version__", "BACKEND", "ModelParams", "SystemState", "rhs_adiabatic", "rhs_full",
    "IntegratorConfig", "Mode", "Trajectory", "integrate", "FixedPoint", "Phase", "PhaseLabel",
    "find_all_stationary", "stationary_phase", "analyze", "detect_ep", "lambda_c", "phi_c",
    "AttractorVerdict", "Kind", "classify_attractor", "run_and_classify", "ground_phase",
    "minimize_energy", "CompensationPlan", "make_plan", "params_from_plan", "SweepSpec", "resume", "sweep",
]
