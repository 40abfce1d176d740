"""Online flow-time scheduling: exact-time simulation, algorithms, adversaries, harness."""
from .core import (FlowReport, Instance, Job, Model, Outcome, Schedule, Segment,
                   ValidationReport, total_flow, validate_schedule)

__all__ = ["FlowReport", "Instance", "Job", "Model", "Outcome", "Schedule", "Segment",
           "ValidationReport", "total_flow", "validate_schedule"]
__version__ = "0.1.0"
