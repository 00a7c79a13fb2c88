from .engine import STAGES, IterationEngine, IterationState

__all__ = ["IterationEngine", "IterationState", "STAGES"]
