"""Energy-flow lines of optical fields under a quantum-to-classical density
interpolation, with a staggered-grid Maxwell evolver for cross-checks."""

__version__ = "0.1.0"

from .emfield import GratingField, LGField, MesoParams  # noqa: E402
from .errors import (ConfigError, DomainError, IntegrationError, MesoflowError,  # noqa: E402
                     NodeError)
from .flow import FlowLine, SeedSpec, sweep_coupling, trace_geometric, trace_timed  # noqa: E402
from .modes import SI, GratingScene, LGScene, PhysicalConstants  # noqa: E402
from .numerics import StepControl  # noqa: E402

__all__ = [
    "ConfigError", "DomainError", "FlowLine", "GratingField", "GratingScene",
    "IntegrationError", "LGField", "LGScene", "MesoParams", "MesoflowError", "NodeError",
    "PhysicalConstants", "SI", "SeedSpec", "StepControl", "sweep_coupling",
    "trace_geometric", "trace_timed",
]
