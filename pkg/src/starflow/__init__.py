"""Minimizing-movement flows of star-shaped planar sets under curvature and a volume penalty."""

from . import barriers, cli, counterexamples, flow, geochecks, io, starset
from .flow import ConfigError, FlowParams, FlowTrace, StepFailed, mm_step, run_flow
from .geochecks import CheckReport
from .starset import DirectionGrid, GeometryError, RadialSet

__version__ = "0.1.0"

__all__ = [
    "barriers",
    "cli",
    "counterexamples",
    "flow",
    "geochecks",
    "io",
    "starset",
    "CheckReport",
    "ConfigError",
    "DirectionGrid",
    "FlowParams",
    "FlowTrace",
    "GeometryError",
    "RadialSet",
    "StepFailed",
    "mm_step",
    "run_flow",
]
