"""Achievable rates of single-user beamforming and multi-user zero forcing
in a MIMO broadcast channel with delayed, quantized transmitter CSI, plus
the SU/MU mode-switching analysis built on them."""

__version__ = "0.1.0"

from .channel import (
    ChannelState,
    ScenarioConfig,
    correlation_from_doppler,
    draw_channel_pair,
    error_variance,
)
from .closed_form import (
    BfDelayParams,
    ZfApproxParams,
    avg_snr_bf_qd,
    r_bf_delay,
    r_bf_perfect,
    r_bf_qd_approx,
    r_bf_quantized,
    r_zf_delay,
    r_zf_lower_bound,
    r_zf_perfect_per_user,
    r_zf_perfect_sum,
    r_zf_qd_approx_per_user,
    r_zf_qd_approx_sum,
    rate_bf_delay,
    rate_zf_delay,
    required_bits,
)
from .codebook import (
    Codebook,
    QuantizationResult,
    cell_approx_interference_sample,
    expected_sq_distortion,
    generate_rvq,
    quantization_delta,
    quantize,
)
from .errors import (
    CapacityError,
    ConfigurationError,
    DegeneratePoleError,
    NumericsError,
    RankError,
)
from .mode_switch import (
    RegionGrid,
    SwitchReport,
    find_switching_points,
    min_activating_value,
    operating_region,
    table2_report,
)
from .numerics import (
    QuadratureSpec,
    RngStream,
    bessel_j0,
    beta_fn,
    expint_en,
    gamma_upper_negint,
    integral_i1,
    integral_i2,
    integral_i3,
    quad_integrate,
    sample_beta_1_n,
    sample_complex_gaussian_vec,
    sample_gamma,
    scaled_expint,
)
from .precoding import PrecoderSet, bf_vector, mmse_precoders, sinr_mu, zf_precoders
from .simulate import (
    MonteCarloSpec,
    RateEstimate,
    estimate_avg_interference,
    simulate_bf,
    simulate_mmse,
    simulate_zf,
)
