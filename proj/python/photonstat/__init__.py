"""Photon statistics toolkit: timestamp simulation and analysis.

Thin python layer over the C++ core. The heavy lifting (kinetic Monte Carlo
simulation, Mandel Q estimation, correlation histograms, model fits) happens
in the `_photonstat` extension module.
"""

from ._photonstat import (
    Acquisition,
    ConfigError,
    DataError,
    TimestampSeries,
    __version__,
    analytic_cw_q,
    background_correct,
    background_uncorrect,
    estimate_deadtime,
    fit_g2_two_exp,
    fit_lifetime,
    fit_pulsed_q,
    fit_saturation,
    g2_histogram,
    g2_two_exp,
    g2_zero_pulsed,
    lifetime_histogram,
    load_acquisition,
    mandel_q,
    merge_channels,
    partition_windows,
    photon_number_distribution,
    pulsed_q0,
    pulsed_q_model,
    rate_model_g2,
    saturation_rate,
    save_acquisition,
    simulate,
    trigger_filter,
)

__all__ = [
    "Acquisition",
    "ConfigError",
    "DataError",
    "TimestampSeries",
    "__version__",
    "analytic_cw_q",
    "background_correct",
    "background_uncorrect",
    "estimate_deadtime",
    "fit_g2_two_exp",
    "fit_lifetime",
    "fit_pulsed_q",
    "fit_saturation",
    "g2_histogram",
    "g2_two_exp",
    "g2_zero_pulsed",
    "lifetime_histogram",
    "load_acquisition",
    "mandel_q",
    "merge_channels",
    "partition_windows",
    "photon_number_distribution",
    "pulsed_q0",
    "pulsed_q_model",
    "rate_model_g2",
    "saturation_rate",
    "save_acquisition",
    "simulate",
    "trigger_filter",
]
