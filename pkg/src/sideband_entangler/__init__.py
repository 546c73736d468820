"""Simulation of heralded entanglement transfer from a Bell-paired TLS couple
to two free electrons on energy-sideband ladders."""

__version__ = "0.1.0"

from .errors import SidebandError  # noqa: E402
from .model import Generator, ProtocolParams, PulseEnvelope, Shape  # noqa: E402
from .hilbert import SidebandWindow, Slot  # noqa: E402
from .dynamics import evolve, factorized_propagate  # noqa: E402
from .entanglement import concurrence, log_negativity  # noqa: E402

__all__ = [
    "__version__",
    "SidebandError",
    "Generator",
    "ProtocolParams",
    "PulseEnvelope",
    "Shape",
    "SidebandWindow",
    "Slot",
    "evolve",
    "factorized_propagate",
    "concurrence",
    "log_negativity",
]
