"""Learned Tikhonov regularization maps for linear-sampling imaging."""

from ._core import (
    Crack,
    DeepregError,
    RhsLibrary,
    RunConfig,
    SceneConfig,
    add_noise,
    build_operator,
    build_rhs_library,
    contrast,
    decompose,
    discrepancy,
    discrepancy_derivative,
    green,
    image,
    imaging_term,
    load_config,
    lsm_image,
    morozov,
    parse_config,
    report,
    simulate,
    solve_alpha,
    tikhonov_solution,
    train,
)

__all__ = [
    "Crack",
    "DeepregError",
    "RhsLibrary",
    "RunConfig",
    "SceneConfig",
    "add_noise",
    "build_operator",
    "build_rhs_library",
    "contrast",
    "decompose",
    "discrepancy",
    "discrepancy_derivative",
    "green",
    "image",
    "imaging_term",
    "load_config",
    "lsm_image",
    "morozov",
    "parse_config",
    "report",
    "simulate",
    "solve_alpha",
    "tikhonov_solution",
    "train",
]
