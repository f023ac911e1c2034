"""Massive-MIMO OFDM downlink PA-distortion analysis.

Closed-form received distortion PSD / SDR / EVM for a single-user MRT
downlink over frequency-selective Rayleigh channels, plus the link-level
Monte Carlo simulator that verifies them.
"""
from .core import (ConfigError, LinkConfig, SpectralDensity, centered_bins,
                   data_bins, dft, idft, in_band_mask, seeded_rng)
from .pa import HermiteModel, PaParams, apply_rapp, fit_hermite, hermite_h3
from .channel import ChannelRealization, draw_channel, mrt_precoder
from .waveform import demodulate, draw_qam, modulate, qam_constellation
from .analytic import (build_kernels, distortion_psd_avg,
                       distortion_psd_conditional, desired_power,
                       evm_theoretical, isotropic_baseline, sdr, xi_sq)
from .mc import McEstimate, estimate, fit_reference_model, run_trial, sweep

__version__ = "0.1.0"
