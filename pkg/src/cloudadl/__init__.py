"""cloudadl: a component-and-connector modeling language with replication,
contexts, and a deterministic simulation kernel.

Typical flow: parse model text, check it, elaborate a topology for a root
component, then drive it with a scenario.
"""

from .analyzer import RuntimeTopology, check, elaborate
from .diagnostics import Diagnostic
from .kernel import FatalUnhandled, Kernel
from .model import ArchitectureModel, Record
from .parser import load_files, parse_model
from .printer import pretty_print
from .scenario import Scenario, ScenarioResult, load_scenario, run_scenario
from .trace import render_trace

__version__ = "0.1.0"

__all__ = [
    "ArchitectureModel",
    "Diagnostic",
    "FatalUnhandled",
    "Kernel",
    "Record",
    "RuntimeTopology",
    "Scenario",
    "ScenarioResult",
    "check",
    "elaborate",
    "load_files",
    "load_scenario",
    "parse_model",
    "pretty_print",
    "render_trace",
    "run_scenario",
    "__version__",
]
