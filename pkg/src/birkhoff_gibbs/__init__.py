"""Truncated Birkhoff normal-form flow of the fractional cubic NLS and its Gibbs measures."""

__version__ = "0.1.0"

from .core import FourierState, ModelParams  # noqa: E402
from .flow import FlowResult, IntegratorConfig, flow_map  # noqa: E402
from .measure import MCEstimate, estimate, sample_gaussian  # noqa: E402

__all__ = ["FourierState", "ModelParams", "FlowResult", "IntegratorConfig", "flow_map",
           "MCEstimate", "estimate", "sample_gaussian", "__version__"]
