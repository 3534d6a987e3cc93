"""Drift implicit Euler scheme for one-dimensional SDEs with constant noise
after a Lamperti-type transform, with a coupled-path harness measuring strong
convergence orders."""

from .analysis import (
    ErrorRow,
    ErrorTable,
    OrderFit,
    error_table,
    fit_order,
    lp_estimate,
    moment_estimate,
    pathwise_sup_error,
    strong_error,
)
from .brownian import IncrementArray, TimeGrid, coarsen, cumulative, generate_increments, path_stream
from .config import PRESETS, ConfigError, ExperimentConfig, load_config
from .processes import (
    CevParams,
    CirParams,
    Interval,
    LampertiSpec,
    ParameterError,
    ProcessSpec,
    cev_spec,
    cir_spec,
    constant_diffusion,
    cos_diffusion,
    lamperti_spec,
    validate_step,
)
from .schemes import (
    SchemePath,
    SolverError,
    StepInput,
    cir_step_closed_form,
    euler_maruyama_path,
    implicit_step_rootfind,
    simulate_path,
)

__version__ = "0.1.0"
