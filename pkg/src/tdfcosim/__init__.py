"""TDF/DE co-simulation of analog sensor clusters with an MPSoC virtual prototype."""

from .casestudy import BrakingModelParams, build_braking_model, build_scaled_model
from .cosim import TraceSet, audit_log, check_conservation, run_cosimulation
from .errors import CosimError
from .modelio import ModelDocument, load_model, parse_model, serialize_model, write_traces
from .scheduler import analyze_causality, compute_schedule, infer_timesteps, validate

__version__ = "0.1.0"

__all__ = [
    "BrakingModelParams", "CosimError", "ModelDocument", "TraceSet", "analyze_causality",
    "audit_log", "build_braking_model", "build_scaled_model", "check_conservation",
    "compute_schedule", "infer_timesteps", "load_model", "parse_model", "run_cosimulation",
    "serialize_model", "validate", "write_traces",
]
