"""Invariant regularization for anti-causal multi-environment regression."""

from ._core import (
    Dataset,
    Model,
    __version__,
    center_per_environment,
    cvar,
    fit_anchor,
    fit_general_loss,
    fit_group_dro,
    fit_mir,
    fit_mir_vir,
    fit_ols,
    fit_ridge,
    fit_vir,
    h_combined,
    h_mir,
    h_vir,
    load_csv,
    moving_average,
    nmse,
    rmse,
    run_loeo,
    spearman,
    vir_alternative_penalty,
    vir_penalty,
)

__all__ = [
    "Dataset",
    "Model",
    "__version__",
    "center_per_environment",
    "cvar",
    "fit_anchor",
    "fit_general_loss",
    "fit_group_dro",
    "fit_mir",
    "fit_mir_vir",
    "fit_ols",
    "fit_ridge",
    "fit_vir",
    "h_combined",
    "h_mir",
    "h_vir",
    "load_csv",
    "moving_average",
    "nmse",
    "rmse",
    "run_loeo",
    "spearman",
    "vir_alternative_penalty",
    "vir_penalty",
]
