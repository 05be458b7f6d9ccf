"""Finite-volume IMEX solver for a two-phenotype tumour invasion model with double taxis."""
from .driver import SimulationConfig, preset, run
from .grid import Grid2D, SimState
from .kinetics import ModelConfig

__all__ = ["Grid2D", "SimState", "ModelConfig", "SimulationConfig", "preset", "run"]
__version__ = "0.1.0"
