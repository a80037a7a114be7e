"""Burst/inter-burst duration statistics of birth-death processes.

Closed-form first-passage-density approximations built from truncated-generator
eigenvalue spectra, exact-in-distribution Monte Carlo validation, a continuous
Bessel-process reference solution, and four-moment distribution fitting.
"""

from .models import (
    BirthDeathSpec,
    bessel_like,
    from_table,
    imitation,
    ornstein_uhlenbeck,
    read_rates_csv,
    write_rates_csv,
)
from .spectrum import (
    SpectrumError,
    SpectrumReport,
    TruncatedGenerator,
    eigenvalues,
    sqrt_linearity,
    truncate,
    write_spectrum_csv,
)
from .approx import (
    HittingMoments,
    MixtureParams,
    approx_pdf_from_spec,
    erfc,
    erfcx,
    exact_mean_hitting,
    i_density,
    mixture_moments,
    rho_from_mean,
    second_order_density,
    write_density_csv,
)
from .simulate import (
    DurationSample,
    LogBinnedPdf,
    Trajectory,
    exact_small_n_cdf,
    exact_small_n_density,
    extract_durations,
    log_binned_pdf,
    read_durations_csv,
    sample_bursts,
    sample_fpt,
    sample_inter_bursts,
    simulate_trajectory,
    stationary_distribution,
    threshold_to_state,
    write_durations_csv,
    write_log_binned_csv,
)
from .bessel import (
    BesselFPTSpec,
    bessel_j_half,
    bessel_zero,
    integral_approx_density,
    series_density,
    simulate_bessel_em,
)
from .fit import (
    FitDiagnostics,
    FitResult,
    fit_diagnostics,
    fit_moments,
    sample_central_moments,
    sample_mixture,
)

__version__ = "0.1.0"
