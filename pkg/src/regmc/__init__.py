"""Model checking mutual exclusion over safe, regular and atomic registers."""
from .register_models import ATOMIC, REGULAR, SAFE, Action, RegisterConfig

__version__ = "0.1.0"
__all__ = ["SAFE", "REGULAR", "ATOMIC", "Action", "RegisterConfig", "__version__"]
