"""Frequency-selective Rayleigh channel with uniform integer tap delays,
and the matched (MRT) precoder.

The channel of antenna m is h^(m)[tau] = sum_l g_{m,l} delta[tau - tau_l]
with i.i.d. standard complex Gaussian gains g and delays tau_l drawn
i.i.d. discrete-uniform on {0, ..., tau_max - 1} (repeats allowed; the
delay set is shared by all antennas).  The frequency response is

    h_k^(m) = sum_l g_{m,l} exp(-j 2 pi k tau_l / N).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .core import ConfigError, complex_normal


@dataclass
class ChannelRealization:
    taps: np.ndarray        # (M, L) complex tap gains
    delays: np.ndarray      # (L,) integer delays in [0, tau_max)
    tau_max: int
    n_fft: int              # oversampled symbol length N
    _freq: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.taps = np.asarray(self.taps, dtype=complex)
        self.delays = np.asarray(self.delays, dtype=int)
        if self.taps.ndim != 2 or self.taps.shape[1] != self.delays.shape[0]:
            raise ConfigError("taps must be (M, L) matching len(delays)")
        if np.any(self.delays < 0) or np.any(self.delays >= self.tau_max):
            raise ConfigError("delays must lie in [0, tau_max)")
        if self.tau_max > self.n_fft:
            raise ConfigError("tau_max must not exceed the FFT length")

    @property
    def m_antennas(self):
        return self.taps.shape[0]

    @property
    def n_taps(self):
        return self.taps.shape[1]

    def impulse_response(self):
        """(M, N) dense impulse response; repeated delays add coherently."""
        ir = np.zeros((self.m_antennas, self.n_fft), dtype=complex)
        np.add.at(ir, (slice(None), self.delays), self.taps)
        return ir

    @property
    def freq(self):
        """(M, N) frequency response h_k^(m), computed lazily via the DFT
        of the impulse response (exactly the exponential sum above)."""
        if self._freq is None:
            self._freq = np.fft.fft(self.impulse_response(), axis=1)
        return self._freq

    def to_json(self):
        return json.dumps({
            "M": int(self.m_antennas),
            "L": int(self.n_taps),
            "tau_max": int(self.tau_max),
            "n_fft": int(self.n_fft),
            "delays": [int(d) for d in self.delays],
            "taps": np.stack([self.taps.real, self.taps.imag], axis=-1).reshape(-1).tolist(),
        })

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        flat = np.asarray(d["taps"], dtype=float).reshape(d["M"], d["L"], 2)
        return cls(taps=flat[..., 0] + 1j * flat[..., 1],
                   delays=np.asarray(d["delays"], dtype=int),
                   tau_max=d["tau_max"], n_fft=d["n_fft"])


def draw_channel(cfg, rng) -> ChannelRealization:
    """Draw one channel realization for the configured (M, L, tau_max, N)."""
    taps = complex_normal(rng, (cfg.M, cfg.L))
    delays = rng.integers(0, cfg.tau_max, size=cfg.L)
    return ChannelRealization(taps=taps, delays=delays,
                              tau_max=cfg.tau_max, n_fft=cfg.N)


def mrt_precoder(ch: ChannelRealization):
    """Maximum-ratio-transmission precoder w_k^(m) = conj(h_k^(m)) / sqrt(L).

    Defined on all N bins; only the in-band bins carry data.  The pairing
    w_k h_k = |h_k|^2 / sqrt(L) is real and nonnegative (coherent combining).
    """
    return np.conj(ch.freq) / np.sqrt(ch.n_taps)
