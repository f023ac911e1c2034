"""Shared numeric conventions: DFT scaling, centered subcarrier indexing,
experiment configuration, and reproducible random streams.

Conventions used across the package:

* The forward DFT is unnormalized (``numpy.fft.fft``); the inverse divides
  by N.  Every spectral formula elsewhere states its scaling relative to
  this convention once, where it is introduced.
* Spectral arrays of length N are stored DC-first with wraparound.  The
  centered subcarrier index k runs over {-N/2+1, ..., N/2}.
* On the oversampled grid of N = mu*Ns bins, the data (in-band) bins are
  the Ns centered indices {-Ns/2+1, ..., Ns/2}; all other bins are
  out of band.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .pa import PaParams

SUPPORTED_QAM_ORDERS = (4, 16, 64, 256)


class ConfigError(ValueError):
    """Configuration or array-contract violation."""


def dft(x, expected_len=None):
    """Forward DFT (unnormalized). Inverse is :func:`idft`, which divides by N."""
    x = np.asarray(x)
    if expected_len is not None and x.shape[-1] != expected_len:
        raise ConfigError(
            f"dft input length {x.shape[-1]} != expected {expected_len}")
    return np.fft.fft(x, axis=-1)


def idft(X, expected_len=None):
    """Inverse DFT; divides by N so that idft(dft(x)) == x."""
    X = np.asarray(X)
    if expected_len is not None and X.shape[-1] != expected_len:
        raise ConfigError(
            f"idft input length {X.shape[-1]} != expected {expected_len}")
    return np.fft.ifft(X, axis=-1)


def to_centered(idx, n_fft):
    """Map wrapped (DC-first) array positions to centered indices in {-N/2+1..N/2}."""
    idx = np.asarray(idx)
    return np.where(idx <= n_fft // 2, idx, idx - n_fft)


def from_centered(k, n_fft):
    """Map centered indices back to wrapped array positions. Inverse of to_centered."""
    return np.asarray(k) % n_fft


def centered_bins(n_fft):
    """Centered index of every wrapped array position, in storage order."""
    return to_centered(np.arange(n_fft), n_fft)


def data_bins(ns):
    """The Ns active (in-band) subcarrier indices, centered and ascending."""
    return np.arange(-ns // 2 + 1, ns // 2 + 1)


def in_band_mask(n_fft, ns):
    """Boolean mask over wrapped bins; True on the Ns data bins."""
    mask = np.zeros(n_fft, dtype=bool)
    mask[from_centered(data_bins(ns), n_fft)] = True
    return mask


def seeded_rng(seed, *stream_ids):
    """Deterministic random stream for (seed, stream_ids...).

    Identical arguments always give identical streams; distinct stream ids
    give statistically independent streams.  Used to derive per-trial,
    per-purpose substreams from one master seed.
    """
    if seed < 0:
        raise ConfigError("seed must be a nonnegative 64-bit integer")
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, stream_ids)]))


def complex_normal(rng, size, sigma=1.0):
    """Circularly symmetric complex Gaussian draws with std ``sigma``."""
    z = rng.standard_normal(size) + 1j * rng.standard_normal(size)
    return (sigma / np.sqrt(2.0)) * z


@dataclass(frozen=True)
class LinkConfig:
    """All experiment parameters for one link-level scenario."""

    M: int                  # BS antenna count
    Ns: int                 # data subcarriers (even)
    mu: int                 # oversampling factor
    L: int                  # number of multipath components
    tau_max: int            # delay spread in samples; delays in [0, tau_max)
    qam_order: int = 64
    pa: PaParams = field(default_factory=lambda: PaParams(nu=1.0, r_o=1.0, p=2.0))
    ibo_db: float = 8.0     # input back-off from PA saturation
    trials: int = 200
    seed: int = 1

    @property
    def N(self):
        """Oversampled symbol length; all spectral arrays have this length."""
        return self.mu * self.Ns

    def diagnostics(self):
        """Return every constraint violation as a human-readable string."""
        issues = []
        if self.M < 1:
            issues.append("M must be a positive integer")
        if self.Ns < 2 or self.Ns % 2 != 0:
            issues.append("Ns must be a positive even integer")
        if self.mu < 1:
            issues.append("mu must be a positive integer")
        if self.L < 1:
            issues.append("L must be a positive integer")
        if self.tau_max < 1:
            issues.append("tau_max must be >= 1")
        if self.tau_max > self.N:
            issues.append("tau_max must not exceed N = mu*Ns")
        if self.qam_order not in SUPPORTED_QAM_ORDERS:
            issues.append(f"qam_order must be one of {SUPPORTED_QAM_ORDERS}")
        if not (self.pa.nu > 0 and self.pa.r_o > 0 and self.pa.p > 0):
            issues.append("PA parameters nu, r_o, p must all be positive")
        if not np.isfinite(self.ibo_db):
            issues.append("ibo_db must be finite")
        if self.trials < 1:
            issues.append("trials must be >= 1")
        if not (0 <= self.seed < 2 ** 64):
            issues.append("seed must be a nonnegative 64-bit integer")
        return issues

    def check(self):
        issues = self.diagnostics()
        if issues:
            raise ConfigError("; ".join(issues))
        return self


@dataclass
class SpectralDensity:
    """Per-bin linear power over the oversampled grid (wrapped storage)."""

    bins: np.ndarray

    def __post_init__(self):
        self.bins = np.asarray(self.bins, dtype=float)
        if self.bins.ndim != 1:
            raise ConfigError("SpectralDensity expects a 1-D array")
        floor = -1e-9 * max(1.0, float(np.max(np.abs(self.bins), initial=0.0)))
        if np.any(self.bins < floor):
            raise ConfigError("spectral density has significantly negative bins")
        np.clip(self.bins, 0.0, None, out=self.bins)

    def __len__(self):
        return len(self.bins)

    def in_band_mean(self, ns):
        return float(self.bins[in_band_mask(len(self.bins), ns)].mean())

    def oob_mean(self, ns):
        return float(self.bins[~in_band_mask(len(self.bins), ns)].mean())

    def centered(self):
        """(centered indices, values) sorted by centered index, for plotting."""
        k = centered_bins(len(self.bins))
        order = np.argsort(k)
        return k[order], self.bins[order]
