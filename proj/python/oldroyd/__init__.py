"""Python bindings for the two-level viscoelastic flow solver."""

from _oldroyd import (  # noqa: F401
    derive_params,
    estimate_infsup,
    kernel_quadratic_form,
    mesh_counts,
    observed_order,
    run_galerkin,
    run_two_level,
    space_info,
    __version__,
)

__all__ = [
    "derive_params",
    "estimate_infsup",
    "kernel_quadratic_form",
    "mesh_counts",
    "observed_order",
    "run_galerkin",
    "run_two_level",
    "space_info",
    "__version__",
]
