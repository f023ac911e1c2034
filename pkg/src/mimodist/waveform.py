"""QAM symbol generation and oversampled OFDM modulation.

Scaling convention (relative to core's unnormalized forward DFT):
``modulate`` returns sqrt(N) * idft(grid), i.e.

    x[n] = (1/sqrt(N)) * sum_k w_k a_k exp(j 2 pi k n / N),

so the per-antenna time-sample variance equals sum_k |w_k|^2 / N for
unit-energy symbols.  ``demodulate`` divides by sqrt(N), making
demodulate(modulate(...)) the identity on the frequency grid.
"""
from __future__ import annotations

import numpy as np

from .core import (ConfigError, SUPPORTED_QAM_ORDERS, data_bins, dft,
                   from_centered, idft)


def qam_constellation(order):
    """Square QAM constellation scaled to exactly unit average energy."""
    if order not in SUPPORTED_QAM_ORDERS:
        raise ConfigError(f"unsupported QAM order {order}")
    side = int(round(np.sqrt(order)))
    levels = np.arange(-side + 1, side, 2, dtype=float)  # e.g. -3,-1,1,3
    points = (levels[:, None] + 1j * levels[None, :]).reshape(-1)
    scale = np.sqrt(2.0 * (side ** 2 - 1) / 3.0)         # sqrt(42) for 64-QAM
    return points / scale


def draw_qam(cfg, rng):
    """Ns i.i.d. uniform symbols from the configured constellation."""
    points = qam_constellation(cfg.qam_order)
    return points[rng.integers(0, len(points), size=cfg.Ns)]


def modulate(data, precoder, cfg):
    """Per-antenna precoded OFDM time signal, (M, N).

    ``data`` holds the Ns in-band symbols ordered by centered index
    {-Ns/2+1, ..., Ns/2}; out-of-band bins are zero by construction.
    """
    data = np.asarray(data)
    precoder = np.asarray(precoder)
    if data.shape != (cfg.Ns,):
        raise ConfigError(f"data must have shape ({cfg.Ns},)")
    if precoder.shape != (cfg.M, cfg.N):
        raise ConfigError(f"precoder must have shape ({cfg.M}, {cfg.N})")
    grid = np.zeros((cfg.M, cfg.N), dtype=complex)
    cols = from_centered(data_bins(cfg.Ns), cfg.N)
    grid[:, cols] = precoder[:, cols] * data[None, :]
    return np.sqrt(cfg.N) * idft(grid)


def demodulate(y):
    """Frequency bins of a received symbol: dft(y)/sqrt(N), wrapped order."""
    y = np.asarray(y)
    n_fft = y.shape[-1]
    return dft(y, expected_len=n_fft) / np.sqrt(n_fft)
