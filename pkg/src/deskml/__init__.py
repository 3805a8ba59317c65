"""deskml: a desk-scale MLaaS control plane on a simulated GPU cluster.

Locality-aware defragmenting scheduling, warm-standby scheduler failover,
session lifecycle and lineage, dataset registry with team visibility, credit
accounting, telemetry aggregation, leaderboards, hyperparameter sweeps, and
an HTTP gateway with a CLI. Everything runs deterministically on virtual
time.
"""

from .cluster import SimConfig
from .platform import ControlPlane, Platform
from .scenario import basic_scenario, load_scenario
from .types import GIB, MIB, SessionState
from .workload import WorkloadProfile

__version__ = "0.1.0"

__all__ = [
    "ControlPlane",
    "GIB",
    "MIB",
    "Platform",
    "SessionState",
    "SimConfig",
    "WorkloadProfile",
    "basic_scenario",
    "load_scenario",
    "__version__",
]
