"""Closed-form spectral engine for the received third-order distortion.

Quantities are expressed in the same measurement units the Monte Carlo
module uses (received bin value DFT(y)/(sqrt(N) g), with g the physical
input scale): the desired in-band power is |alpha1|^2 M^2 L and the
distortion coefficient entering every formula is the *normalized* third
order coefficient alpha3 * sigma_x^2 (see HermiteModel.alpha3_normalized).

Core objects:

* xi_Delta = (1/tau_max) sum_{tau=0}^{tau_max-1} exp(-j 2 pi Delta tau / N),
  the characteristic function (Dirichlet kernel) of the uniform delay law.
* f[Delta, delays] = |sum_l exp(-j 2 pi Delta tau_l / N)|^2 / L^2, the
  conditional subcarrier-correlation factor.
* The received distortion PSD conditioned on a delay set:

      S_dd[k | delays] = (2 M^2 |a3|^2 / (Ns^2 L^3))
                         * sum_{k',k''} (L^2 f[k-k'] + L^2 f[k-k''])^2

  with |k'| , |k''| , |k'+k''-k| all in band (a3 = alpha3_normalized).
* Its delay-set average, available in two modes:
    - "exact":    the full fourth-moment expectation over delays
                  (default; used by sdr/evm),
    - "dominant": the dominant-term kernel approximation
                  eps_f2 = L^2 + (L^4 - L^2) xi_sq^2 and
                  eps_ff = L^2 + (L^4 - L^2) xi_sq(a) xi_sq(b).

All index arithmetic is circular modulo N, matching the discrete-frequency
model in which third-order products alias onto the oversampled grid.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import (ConfigError, SpectralDensity, data_bins, from_centered,
                   in_band_mask)


# ---------------------------------------------------------------------------
# Dirichlet kernel and delay-set correlation factors
# ---------------------------------------------------------------------------

def xi(delta, tau_max, n_fft):
    """Complex kernel xi_Delta = (1/tau_max) sum_tau exp(-j2pi Delta tau/N)."""
    if tau_max < 1:
        raise ConfigError("tau_max must be >= 1")
    delta = np.asarray(delta)
    taus = np.arange(tau_max)
    phase = -2j * np.pi * delta[..., None] * taus / n_fft
    return np.exp(phase).sum(axis=-1) / tau_max


def xi_sq(delta, tau_max, n_fft):
    """|xi_Delta|^2 via the closed sine-ratio form, in [0, 1].

    Equals |sin(pi Delta tau_max / N) / (tau_max sin(pi Delta / N))|^2 with
    the removable singularity at Delta == 0 (mod N) evaluated by limit (1).
    """
    if tau_max < 1:
        raise ConfigError("tau_max must be >= 1")
    delta = np.asarray(delta, dtype=float)
    den = np.sin(np.pi * delta / n_fft)
    num = np.sin(np.pi * delta * tau_max / n_fft)
    singular = np.abs(den) < 1e-9
    safe_den = np.where(singular, 1.0, den)
    val = np.where(singular, 1.0, np.abs(num / (tau_max * safe_den)) ** 2)
    return val if val.shape else float(val)


def f_exact(delta, delays, n_fft):
    """Conditional correlation factor f[Delta, delays] in [0, 1].

    f = |sum_l exp(-j 2 pi Delta tau_l / N)|^2 / L^2; L^2 f is the braced
    conditional quantity in the distortion sum.
    """
    delays = np.asarray(delays)
    delta = np.asarray(delta)
    s = np.exp(-2j * np.pi * delta[..., None] * delays / n_fft).sum(axis=-1)
    val = np.abs(s) ** 2 / delays.size ** 2
    return val if val.shape else float(val)


def _falling(L, k):
    """Falling factorial L (L-1) ... (L-k+1); zero when k > L."""
    out = 1.0
    for i in range(k):
        out *= (L - i)
    return max(out, 0.0)


@dataclass
class CorrelationKernels:
    """Dominant-term delay-average kernels on the wrapped offset grid.

    xi2[D] = |xi_D|^2; eps_f[D] = E[L^2 f] = L + (L^2-L) xi2 (exact);
    eps_f2[D] = L^2 + (L^4-L^2) xi2^2 (dominant-term approximation of
    E[(L^2 f)^2]).  Arrays are length N and N-periodic in the offset, so
    any Delta in (-N, N) maps to index Delta mod N.
    """

    xi2: np.ndarray
    eps_f: np.ndarray
    eps_f2: np.ndarray
    L: int
    tau_max: int
    n_fft: int

    def at(self, delta):
        """Kernel values at (possibly negative) integer offsets."""
        idx = np.asarray(delta) % self.n_fft
        return self.xi2[idx], self.eps_f[idx], self.eps_f2[idx]


def build_kernels(L, tau_max, n_fft) -> CorrelationKernels:
    if L < 1 or tau_max < 1 or n_fft < 1:
        raise ConfigError("L, tau_max, N must all be positive")
    x2 = xi_sq(np.arange(n_fft), tau_max, n_fft)
    eps_f = L + (L ** 2 - L) * x2
    eps_f2 = L ** 2 + (L ** 4 - L ** 2) * x2 ** 2
    return CorrelationKernels(xi2=x2, eps_f=eps_f, eps_f2=eps_f2,
                              L=L, tau_max=tau_max, n_fft=n_fft)


def eps_ff_exact(delta_a, delta_b, L, tau_max, n_fft):
    """Exact delay average E[(L^2 f[a]) (L^2 f[b])] for i.i.d. uniform delays.

    Expanding the fourth moment of the exponential sum over set partitions
    of the four tap indices gives, with falling factorials L_(k) and
    P(D) = |xi_D|^2:

        L_(4) P(a) P(b)
      + L_(3) [ P(a) + P(b) + 2 Re(xi_{a+b} xi_a* xi_b*)
                            + 2 Re(xi_{a-b} xi_a* xi_b) ]
      + L_(2) [ 1 + |xi_{a+b}|^2 + |xi_{a-b}|^2 + 2 P(a) + 2 P(b) ]
      + L.

    The dominant-term kernel keeps only L_(4) -> L^4 - L^2 times P(a)P(b)
    plus the L^2 diagonal.
    """
    xa = xi(np.asarray(delta_a), tau_max, n_fft)
    xb = xi(np.asarray(delta_b), tau_max, n_fft)
    xab = xi(np.asarray(delta_a) + np.asarray(delta_b), tau_max, n_fft)
    xamb = xi(np.asarray(delta_a) - np.asarray(delta_b), tau_max, n_fft)
    pa, pb = np.abs(xa) ** 2, np.abs(xb) ** 2
    l4, l3, l2 = _falling(L, 4), _falling(L, 3), _falling(L, 2)
    val = (l4 * pa * pb
           + l3 * (pa + pb
                   + 2.0 * np.real(xab * np.conj(xa) * np.conj(xb))
                   + 2.0 * np.real(xamb * np.conj(xa) * xb))
           + l2 * (1.0 + np.abs(xab) ** 2 + np.abs(xamb) ** 2
                   + 2.0 * pa + 2.0 * pb)
           + L)
    return val if np.asarray(val).shape else float(val)


def eps_f2_exact(delta, L, tau_max, n_fft):
    """Exact delay average E[(L^2 f[Delta])^2] (= eps_ff_exact at a = b)."""
    return eps_ff_exact(delta, delta, L, tau_max, n_fft)


# ---------------------------------------------------------------------------
# Admissible-pair geometry and double-sum engines
# ---------------------------------------------------------------------------
# For each output bin k the sum runs over pairs (k', k'') with k', k'' and
# k' + k'' - k all in band (indices circular mod N).  Writing a = k - k',
# b = k - k'', every summand used here has the separable form
#     A(a) + A(b) + 2 beta0 + 2 beta1 p(a) p(b)
# which reduces to circular correlations/convolutions with the in-band mask.

def pair_count(n_fft, ns):
    """C[k]: number of admissible (k', k'') pairs for each output bin."""
    m = in_band_mask(n_fft, ns).astype(float)
    fm = np.fft.fft(m)
    q = np.real(np.fft.ifft(fm * np.conj(fm)))        # q[a] = sum_j m[j] m[j-a]
    c = np.real(np.fft.ifft(np.fft.fft(q) * fm))
    return np.rint(c).astype(int)


def _pair_sum_fast(A, beta0, p, beta1, n_fft, ns, chunk=256):
    """Sum_{pairs(k)} [A(a) + A(b) + 2 beta0 + 2 beta1 p(a) p(b)] for all k.

    A and p are length-N arrays over the wrapped offset.  The A and constant
    parts are single circular convolutions; the p(a)p(b) cross term needs a
    per-k self-convolution of the masked, shifted p, evaluated in chunks of
    output bins to bound memory.
    """
    m = in_band_mask(n_fft, ns).astype(float)
    fm = np.fft.fft(m)
    q = np.real(np.fft.ifft(fm * np.conj(fm)))
    term_a = 2.0 * np.real(np.fft.ifft(np.fft.fft(A * q) * fm))
    count = np.real(np.fft.ifft(np.fft.fft(q) * fm))
    cross = np.empty(n_fft)
    ks = np.arange(n_fft)
    for lo in range(0, n_fft, chunk):
        kk = ks[lo:lo + chunk, None]
        jj = ks[None, :]
        shifted = p[(kk - jj) % n_fft] * m[None, :]    # p(k - j) on in-band j
        f = np.fft.fft(shifted, axis=1)
        conv = np.real(np.fft.ifft(f * f, axis=1))     # sum_{j'+j''=s} ...
        cross[lo:lo + chunk] = (conv * m[(jj - kk) % n_fft]).sum(axis=1)
    return term_a + 2.0 * beta0 * count + 2.0 * beta1 * cross


def _pair_sum_direct(summand, n_fft, ns):
    """Reference O(N Ns^2) evaluation; summand(a_mat, b_mat) -> matrix."""
    ks = data_bins(ns)
    out = np.zeros(n_fft)
    for w in range(n_fft):
        kc = w if w <= n_fft // 2 else w - n_fft
        amat = kc - ks[:, None] + 0 * ks[None, :]
        bmat = kc - ks[None, :] + 0 * ks[:, None]
        third = (ks[:, None] + ks[None, :] - kc) % n_fft
        mask = in_band_mask(n_fft, ns)[third]
        vals = summand(amat, bmat)
        out[w] = np.sum(vals[mask])
    return out


# ---------------------------------------------------------------------------
# Conditional distortion PSD
# ---------------------------------------------------------------------------

def _conditional_prefactor(m_antennas, ns, L, alpha3):
    return 2.0 * m_antennas ** 2 * np.abs(alpha3) ** 2 / (ns ** 2 * L ** 3)


def distortion_psd_conditional(ch_delays, L, tau_max, n_fft, ns, m_antennas,
                               alpha3, method="fast") -> SpectralDensity:
    """Received distortion PSD for a fixed delay set (average over gains/data).

    S_dd[k | delays] = (2 M^2 |alpha3|^2 / (Ns^2 L^3))
                       * sum_{pairs} (L^2 f[k-k'] + L^2 f[k-k''])^2.

    ``alpha3`` is the normalized third-order coefficient (alpha3 sigma_x^2).
    """
    delays = np.asarray(ch_delays)
    if delays.size != L:
        raise ConfigError("delays must have length L")
    if np.any(delays < 0) or np.any(delays >= tau_max):
        raise ConfigError("delays must lie in [0, tau_max)")
    g = L ** 2 * f_exact(np.arange(n_fft), delays, n_fft)   # L^2 f, N-periodic
    # (g(a) + g(b))^2 = g(a)^2 + g(b)^2 + 2 g(a) g(b)
    if method == "fast":
        pair_sum = _pair_sum_fast(A=g ** 2, beta0=0.0, p=g, beta1=1.0,
                                  n_fft=n_fft, ns=ns)
    elif method == "direct":
        gg = lambda d: g[np.asarray(d) % n_fft]
        pair_sum = _pair_sum_direct(lambda a, b: (gg(a) + gg(b)) ** 2,
                                    n_fft, ns)
    else:
        raise ConfigError(f"unknown method {method!r}")
    return SpectralDensity(_conditional_prefactor(m_antennas, ns, L, alpha3)
                           * pair_sum)


# ---------------------------------------------------------------------------
# Delay-averaged distortion PSD
# ---------------------------------------------------------------------------

@lru_cache(maxsize=32)
def _avg_pair_sum_dominant(L, tau_max, n_fft, ns):
    """Pair sum of the dominant-term kernels (module docstring, mode="dominant")."""
    kern = build_kernels(L, tau_max, n_fft)
    beta1 = L ** 4 - L ** 2
    return _pair_sum_fast(A=kern.eps_f2, beta0=float(L ** 2), p=kern.xi2,
                          beta1=float(beta1), n_fft=n_fft, ns=ns)


@lru_cache(maxsize=32)
def _avg_pair_sum_exact(L, tau_max, n_fft, ns):
    """Exact pair sum  sum_{pairs(k)} [e2(a) + e2(b) + 2 eps_ff_exact(a, b)].

    Separable pieces reduce to per-bin convolutions over s = k' + k''
    (offsets a + b = 2k - s); the only true two-dimensional piece is the
    Re(xi_{a-b} xi_a* xi_b) term, evaluated densely per bin.
    """
    ks = data_bins(ns)
    nb = ks.size
    xiw = xi(np.arange(n_fft), tau_max, n_fft)
    pw = np.abs(xiw) ** 2
    e2 = np.asarray(eps_f2_exact(np.arange(n_fft), L, tau_max, n_fft))
    inb = in_band_mask(n_fft, ns)
    l4, l3, l2 = _falling(L, 4), _falling(L, 3), _falling(L, 2)

    # Fixed (i, j) tables over the data-bin grid; s-index = i + j.
    dmat = (ks[None, :] - ks[:, None]) % n_fft          # ks_j - ks_i
    xi_diff = xiw[dmat]
    svals = ks[0] + ks                                   # ascending, step 1
    svals = np.concatenate([svals, ks[-1] + ks[1:]])     # all i+j sums, 2nb-1
    nconv = 2 * nb                                       # linear-conv FFT size
    f_one = np.fft.fft(np.ones(nb), nconv)
    cnt = np.convolve(np.ones(nb), np.ones(nb))          # pairs per s
    # Anti-diagonal sums of |xi(ks_j - ks_i)|^2 (the p(a-b) term needs no
    # k-dependent factor beyond the admissibility window).
    ad_p = np.zeros(2 * nb - 1)
    np.add.at(ad_p, np.add.outer(np.arange(nb), np.arange(nb)).ravel(),
              pw[dmat].ravel())
    idx_s = np.add.outer(np.arange(nb), np.arange(nb))

    win = np.arange(nb)
    out = np.empty(n_fft)
    for w in range(n_fft):
        kc = w if w <= n_fft // 2 else w - n_fft
        aw = (kc - ks) % n_fft
        gc = np.conj(xiw[aw])                            # xi*(a_i); a,b share grid
        pa = pw[aw]
        sw = inb[(svals - kc) % n_fft].astype(float)     # admissible s window
        # Row sums of the admissibility mask: R_i = sum_j sw[i+j].
        csum = np.concatenate(([0.0], np.cumsum(sw)))
        row = csum[win + nb] - csum[win]
        term_a = 2.0 * float(e2[aw] @ row)
        # s-separable linear convolutions over i + j = s, via padded FFTs.
        f_g = np.fft.fft(gc, nconv)
        f_p = np.fft.fft(pa, nconv)
        gg = np.fft.ifft(f_g * f_g)[:2 * nb - 1]         # sum_{i+j=s} xi*xi*
        pa_conv = np.real(np.fft.ifft(f_p * f_p))[:2 * nb - 1]
        pa_one = np.real(np.fft.ifft(f_p * f_one))[:2 * nb - 1]
        xs = xiw[(2 * kc - svals) % n_fft]               # xi_{a+b}
        p2s = pw[(2 * kc - svals) % n_fft]
        eff_s = (l4 * pa_conv
                 + 2.0 * l3 * pa_one
                 + 2.0 * l3 * np.real(xs * gg)
                 + l2 * (cnt + p2s * cnt + 4.0 * pa_one)
                 + L * cnt
                 + l2 * ad_p)
        cross_sep = float(sw @ eff_s)
        # Dense 2-D piece: sum_{ij} sw Re(xi_{a-b} xi*(a_i) xi(b_j)).
        v = np.real(xi_diff * np.outer(gc, np.conj(gc)))
        x2 = float(np.sum(v * sw[idx_s]))
        out[w] = term_a + 2.0 * (cross_sep + 2.0 * l3 * x2)
    return out


def distortion_psd_avg(L, tau_max, n_fft, ns, m_antennas, alpha3,
                       mode="exact") -> SpectralDensity:
    """Delay-averaged received distortion PSD.

    mode="exact" evaluates the full fourth-moment expectation over the
    uniform delay law (default); mode="dominant" uses the dominant-term
    kernel approximation (see module docstring).  ``alpha3`` is the
    normalized third-order coefficient.
    """
    if mode == "exact":
        pair_sum = _avg_pair_sum_exact(int(L), int(tau_max), int(n_fft), int(ns))
    elif mode == "dominant":
        pair_sum = _avg_pair_sum_dominant(int(L), int(tau_max), int(n_fft), int(ns))
    else:
        raise ConfigError(f"unknown mode {mode!r}")
    return SpectralDensity(_conditional_prefactor(m_antennas, ns, L, alpha3)
                           * pair_sum)


# ---------------------------------------------------------------------------
# Desired power, SDR, EVM, isotropic baseline
# ---------------------------------------------------------------------------

def effective_power_shape(L, tau_max, n_fft, ns):
    """Gamma shape of an antenna's realized mean input power (unit mean).

    The per-antenna input power averages |h_k|^2/L over the Ns data bins;
    its variance follows from the exact pair kernel eps_f:

        Var = mean over in-band (k, k') of eps_f(k - k') / L^2
            = 1/L + (1 - 1/L) * mean in-band xi_sq,

    so nearby subcarriers (correlation length ~ N/tau_max) act as a
    reduced number 1/Var of independent power contributions.  Used to
    weight the ensemble-average PA coefficients.
    """
    mask = in_band_mask(n_fft, ns).astype(float)
    fm = np.fft.fft(mask)
    counts = np.real(np.fft.ifft(fm * np.conj(fm)))
    xi2_bar = float((counts * xi_sq(np.arange(n_fft), tau_max, n_fft)).sum()
                    / ns ** 2)
    var = 1.0 / L + (1.0 - 1.0 / L) * xi2_bar
    return 1.0 / var


def desired_power(m_antennas, L, alpha1):
    """LLN in-band desired power |alpha1|^2 M^2 L (constant over data bins)."""
    if m_antennas < 1 or L < 1:
        raise ConfigError("M and L must be positive")
    return float(np.abs(alpha1) ** 2 * m_antennas ** 2 * L)


def _sdr_array(cfg, model, mode="exact"):
    """SDR over the Ns data bins (ascending centered index).

    Both desired and distortion powers scale as M^2, so M is cancelled
    algebraically and never enters: results are bitwise identical for any M.
    """
    if mode == "exact":
        pair_sum = _avg_pair_sum_exact(cfg.L, cfg.tau_max, cfg.N, cfg.Ns)
    else:
        pair_sum = _avg_pair_sum_dominant(cfg.L, cfg.tau_max, cfg.N, cfg.Ns)
    a3 = np.abs(model.alpha3_normalized) ** 2
    dist = (2.0 * a3 / (cfg.Ns ** 2 * cfg.L ** 3)) \
        * pair_sum[from_centered(data_bins(cfg.Ns), cfg.N)]
    return np.abs(model.alpha1) ** 2 * cfg.L / dist


def sdr(k, cfg, model, mode="exact"):
    """Signal-to-distortion ratio on data subcarrier k (centered index)."""
    bins = data_bins(cfg.Ns)
    if k not in bins:
        raise ConfigError(f"subcarrier {k} is out of band")
    return float(_sdr_array(cfg, model, mode)[int(np.where(bins == k)[0][0])])


def evm_theoretical(cfg, model, mode="exact"):
    """Per-data-bin EVM power 1/SDR[k]; aggregate rms EVM = sqrt(mean)."""
    return 1.0 / _sdr_array(cfg, model, mode)


def isotropic_baseline(cfg, model) -> SpectralDensity:
    """Received distortion PSD if per-antenna distortions added incoherently.

    The coherent M^2 array gain is replaced by M (power addition) times the
    per-antenna channel gain L, flattening the conditional shape to the
    admissible-pair count:  S_iso[k] = M L (2 |a3|^2 / Ns^2) C[k].
    """
    a3 = np.abs(model.alpha3_normalized) ** 2
    c = pair_count(cfg.N, cfg.Ns)
    return SpectralDensity(cfg.M * cfg.L * 2.0 * a3 / cfg.Ns ** 2 * c)


def isotropic_evm(cfg, model):
    """Per-data-bin EVM power of the isotropic baseline (shrinks as 1/M)."""
    iso = isotropic_baseline(cfg, model)
    num = iso.bins[from_centered(data_bins(cfg.Ns), cfg.N)]
    return num / desired_power(cfg.M, cfg.L, model.alpha1)


def aggregate_evm(evm_power):
    """RMS EVM (linear amplitude ratio) from per-bin EVM powers."""
    return float(np.sqrt(np.mean(evm_power)))
