"""Stake-weighted decentralized AI-service marketplace: protocol core and simulator."""

from .config import ScenarioConfig, bundled, load, loads
from .errors import ProtocolError
from .ledger import GlobalLedger
from .simulation import MetricsReport, compare_runs, run_scenario

__all__ = [
    "GlobalLedger",
    "MetricsReport",
    "ProtocolError",
    "ScenarioConfig",
    "bundled",
    "compare_runs",
    "load",
    "loads",
    "run_scenario",
]
__version__ = "0.1.0"
