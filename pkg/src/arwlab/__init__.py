"""arwlab: simulation and verification lab for driven-dissipative ARW."""

from .configuration import Configuration
from .chain import (
    ChainRun,
    DrivingSequence,
    chain_step,
    run_chain,
    sample_stationary,
    stationary_density,
)
from .engine import (
    State,
    StabilizeReport,
    activate,
    jump_all,
    jump_rounds_to_empty,
    jump_site,
    stabilize,
    topple,
    visits,
    visits_all,
)
from .instructions import Instruction, InstructionSource
from .rng import derive_seed
from .topology import Topology, build_general, build_interval

__all__ = [
    "ChainRun",
    "Configuration",
    "DrivingSequence",
    "Instruction",
    "InstructionSource",
    "StabilizeReport",
    "State",
    "Topology",
    "activate",
    "build_general",
    "build_interval",
    "chain_step",
    "derive_seed",
    "jump_all",
    "jump_rounds_to_empty",
    "jump_site",
    "run_chain",
    "sample_stationary",
    "stabilize",
    "stationary_density",
    "topple",
    "visits",
    "visits_all",
]

__version__ = "0.1.0"
