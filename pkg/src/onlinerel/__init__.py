"""Online reliability of fault-tree models under monitoring evidence."""

from importlib import resources

from .bn import compile_to_bn, eliminate_probability, enumerate_probability, total_probability_check
from .evidence import (
    EvidenceCase,
    Observation,
    ReliabilityReport,
    apply_case,
    open_session,
    run_case_suite,
    sweep,
    verify_against_paper,
)
from .ftree import FaultTree, ModelError, canonicalize, fingerprint, parse_model, validate

__version__ = "0.1.0"


def load_blade_model() -> FaultTree:
    """The bundled offshore wind turbine blade model."""
    return parse_model(resources.files(__name__).joinpath("data/blade.ft").read_text("utf-8"))
