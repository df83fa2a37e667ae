"""synloco: synergy-constrained reinforcement learning for planar
muscle-driven locomotion, from gait data ingest through NMF synergy
extraction, simulation, training, and biomechanical benchmarking."""

__version__ = "0.1.0"

from .errors import DataError, NumericalError

__all__ = ["DataError", "NumericalError", "__version__"]
