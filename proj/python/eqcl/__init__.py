"""Python bindings for the eqcl C++ core."""

from ._core import (
    EqclError,
    amp_phase,
    amp_phase_inverse,
    config_template,
    cross_entropy,
    dft,
    emd_decompose,
    emd_view,
    emd_view_inverse,
    idft,
    info_nce,
    make_dataset,
    read_dataset,
    run_cli,
    standardize_view,
    test_split_seed,
    time_augment,
    time_augment_inverse,
    write_dataset,
)

__all__ = [
    "EqclError",
    "amp_phase",
    "amp_phase_inverse",
    "config_template",
    "cross_entropy",
    "dft",
    "emd_decompose",
    "emd_view",
    "emd_view_inverse",
    "idft",
    "info_nce",
    "make_dataset",
    "read_dataset",
    "run_cli",
    "standardize_view",
    "test_split_seed",
    "time_augment",
    "time_augment_inverse",
    "write_dataset",
]
