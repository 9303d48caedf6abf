"""Network SEIR epidemic simulator over farm shipment networks."""

from .kernels import backend as kernel_backend
from .network import ContactGraphSpec, Farm, FarmNetwork, Shipment, generate_network, sample_contact_graph
from .scenario import OBSERVABLES, ScenarioConfig, simulate
from .world import (
    RANDOM,
    OutbreakSeed,
    SeirParams,
    SeirWorld,
    seed_outbreak,
    step_day,
)

__all__ = [
    "ContactGraphSpec",
    "Farm",
    "FarmNetwork",
    "OBSERVABLES",
    "OutbreakSeed",
    "RANDOM",
    "ScenarioConfig",
    "SeirParams",
    "SeirWorld",
    "Shipment",
    "generate_network",
    "kernel_backend",
    "sample_contact_graph",
    "seed_outbreak",
    "simulate",
    "step_day",
]
