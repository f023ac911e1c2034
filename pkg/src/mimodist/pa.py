"""Memoryless power-amplifier models and their third-order Bussgang
(Ito-Hermite) linearization.

For a circularly symmetric Gaussian input x with standard deviation
sigma_x, the PA output is decomposed as

    psi(x) ~= alpha1 * x  +  alpha3 * sigma_x^3 * H3(x / sigma_x),

where H3(z) = z|z|^2 - 2z is the third-order complex Hermite basis,
orthogonal to z under the Gaussian measure.  alpha1 * x is the desired
(linear) component and the H3 term is the uncorrelated distortion.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_genlaguerre, roots_laguerre


@dataclass(frozen=True)
class PaParams:
    """Rapp AM/AM parameters.

    nu is the small-signal gain, r_o the saturation amplitude, and p the
    smoothness exponent (often written as a second "mu" in the literature;
    renamed here to avoid clashing with the oversampling factor).
    """

    nu: float = 1.0
    r_o: float = 1.0
    p: float = 2.0


def rapp_amplitude(r, params: PaParams):
    """Rapp AM/AM curve A(r) = nu*r * (1 + (nu*r/r_o)^(2p))^(-1/(2p)).

    Strictly increasing in r and bounded by r_o (saturation).
    """
    r = np.asarray(r, dtype=float)
    ratio = (params.nu * r / params.r_o) ** (2.0 * params.p)
    return params.nu * r * (1.0 + ratio) ** (-1.0 / (2.0 * params.p))


def apply_rapp(x, params: PaParams):
    """Apply the Rapp nonlinearity per sample; phase is preserved (AM/AM only)."""
    x = np.asarray(x)
    r = np.abs(x)
    gain = np.ones_like(r) * params.nu
    nz = r > 0
    gain[nz] = rapp_amplitude(r[nz], params) / r[nz]
    return x * gain


def hermite_h3(z):
    """Third-order complex Hermite basis H3(z) = z|z|^2 - 2z."""
    z = np.asarray(z)
    return z * np.abs(z) ** 2 - 2.0 * z


@dataclass
class HermiteModel:
    """Third-order Bussgang model of a nonlinearity at operating point sigma_x."""

    alpha1: complex
    alpha3: complex
    sigma_x: float
    residual: float = float("nan")  # rms of psi(x) - (u + d), in output units

    @property
    def alpha3_normalized(self):
        """Third-order coefficient referred to a unit-variance input.

        Equals alpha3 * sigma_x^2; this is the coefficient to feed spectral
        closed forms stated for unit-power baseband signals.
        """
        return self.alpha3 * self.sigma_x ** 2

    def to_json(self):
        return json.dumps({
            "alpha1_re": float(np.real(self.alpha1)),
            "alpha1_im": float(np.imag(self.alpha1)),
            "alpha3_re": float(np.real(self.alpha3)),
            "alpha3_im": float(np.imag(self.alpha3)),
            "sigma_x": float(self.sigma_x),
        })

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(alpha1=d["alpha1_re"] + 1j * d["alpha1_im"],
                   alpha3=d["alpha3_re"] + 1j * d["alpha3_im"],
                   sigma_x=d["sigma_x"])


def _gaussian_input(sigma_x, n_samples, rng):
    z = rng.standard_normal(n_samples) + 1j * rng.standard_normal(n_samples)
    return (sigma_x / np.sqrt(2.0)) * z


def fit_hermite(psi, sigma_x, n_samples=200_000, rng=None) -> HermiteModel:
    """Project a nonlinearity onto the orthogonal basis {x, sigma^3 H3(x/sigma)}.

    Draws x ~ CN(0, sigma_x^2) and returns the sample projection
    coefficients

        alpha1 = E[psi(x) x*] / sigma_x^2,
        alpha3 = E[psi(x) conj(s3H3)] / E[|s3H3|^2],  s3H3 = sigma^3 H3(x/sigma).
    """
    if not (sigma_x > 0 and np.isfinite(sigma_x)):
        raise ValueError("sigma_x must be positive and finite")
    if n_samples < 10_000:
        raise ValueError("n_samples must be at least 1e4 for a stable fit")
    if rng is None:
        rng = np.random.default_rng(0)
    x = _gaussian_input(sigma_x, int(n_samples), rng)
    y = np.asarray(psi(x))
    if not np.all(np.isfinite(y)):
        raise ValueError("nonlinearity produced non-finite output")
    basis3 = sigma_x ** 3 * hermite_h3(x / sigma_x)
    alpha1 = np.mean(y * np.conj(x)) / np.mean(np.abs(x) ** 2)
    alpha3 = np.mean(y * np.conj(basis3)) / np.mean(np.abs(basis3) ** 2)
    resid = y - alpha1 * x - alpha3 * basis3
    return HermiteModel(alpha1=complex(alpha1), alpha3=complex(alpha3),
                        sigma_x=float(sigma_x),
                        residual=float(np.sqrt(np.mean(np.abs(resid) ** 2))))


def fit_hermite_multi(psi, sigmas, n_samples=16_384, rng=None):
    """Vectorized fit_hermite over many operating points (e.g. one per antenna).

    A single unit-variance Gaussian sample batch is scaled to each sigma, so
    the per-row estimates share noise and cost one psi evaluation.  Returns
    (alpha1, alpha3) arrays shaped like ``sigmas``.
    """
    sigmas = np.asarray(sigmas, dtype=float)
    if np.any(sigmas <= 0):
        raise ValueError("all sigmas must be positive")
    if rng is None:
        rng = np.random.default_rng(0)
    z = _gaussian_input(1.0, int(n_samples), rng)          # unit variance
    x = sigmas[..., None] * z
    y = np.asarray(psi(x))
    if not np.all(np.isfinite(y)):
        raise ValueError("nonlinearity produced non-finite output")
    basis3 = sigmas[..., None] ** 3 * hermite_h3(x / sigmas[..., None])
    alpha1 = np.mean(y * np.conj(x), axis=-1) / np.mean(np.abs(x) ** 2, axis=-1)
    alpha3 = (np.mean(y * np.conj(basis3), axis=-1)
              / np.mean(np.abs(basis3) ** 2, axis=-1))
    return alpha1, alpha3


@lru_cache(maxsize=4)
def _laguerre_rule(n):
    return roots_laguerre(n)


def hermite_coefficients(params: PaParams, sigma, n_nodes=120):
    """Exact (alpha1, alpha3) of an AM/AM nonlinearity at operating point sigma.

    For a circular Gaussian input the Hermite projections reduce to radial
    integrals over the Rayleigh envelope; with t = r^2/sigma^2 ~ Exp(1),

        alpha1 = E[A(sigma sqrt(t)) sqrt(t)] / sigma,
        alpha3 = E[A(sigma sqrt(t)) (t^(3/2) - 2 sqrt(t))] / (2 sigma^3),

    evaluated by Gauss-Laguerre quadrature (machine precision for smooth
    AM/AM curves; converged well below 60 nodes for the Rapp model).  The
    sampled fit_hermite estimator is unbiased for the same values but has
    heavy-tailed noise; this is the deterministic route used in the
    simulation pipeline.  Vectorized over ``sigma``.
    """
    nodes, weights = _laguerre_rule(n_nodes)
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma <= 0):
        raise ValueError("sigma must be positive")
    amp = rapp_amplitude(sigma[..., None] * np.sqrt(nodes), params)
    alpha1 = (weights * amp * np.sqrt(nodes)).sum(axis=-1) / sigma
    alpha3 = ((weights * amp * (nodes ** 1.5 - 2.0 * np.sqrt(nodes))).sum(axis=-1)
              / (2.0 * sigma ** 3))
    return alpha1, alpha3


def ensemble_coefficients(params: PaParams, sigma_nominal, shape,
                          n_nodes=64):
    """Channel-weighted ensemble averages of the per-antenna coefficients.

    Antenna m operates at sigma_m = sigma_nominal * sqrt(u_m), where u_m is
    its realized mean input power relative to nominal; across antennas u is
    modeled as Gamma(shape, 1/shape) (unit mean; ``shape`` is the effective
    number of independent channel power contributions, see
    analytic.effective_power_shape).  In the coherently combined received
    signal, antenna m's desired term is weighted (on average over
    subcarriers) by u_m and its third-order distortion term by u_m^2, so
    the effective array-average coefficients entering the closed forms are
    the weighted expectations

        alpha1_bar = E[alpha1(sigma(u)) u]   / E[u],
        alpha3_bar = E[alpha3(sigma(u)) u^2] / E[u^2].

    (For a flat single-tap channel the u^2 weighting of alpha3 is exact.)
    Both expectations are evaluated with generalized Gauss-Laguerre
    quadrature over the Gamma law; shape must stay below ~170 so the Gamma
    normalization is in float range.
    """
    shape = float(shape)
    if not (0 < shape <= 170):
        raise ValueError("shape must be in (0, 170]")
    nodes, weights = roots_genlaguerre(n_nodes, shape - 1.0)
    u = nodes / shape
    w = weights / weights.sum()            # sum(weights) = Gamma(shape)
    a1, a3 = hermite_coefficients(params, sigma_nominal * np.sqrt(u))
    a1_bar = float((w * a1 * u).sum() / (w * u).sum())
    a3_bar = float((w * a3 * u ** 2).sum() / (w * u ** 2).sum())
    return a1_bar, a3_bar


def decompose(x, model: HermiteModel):
    """Split the third-order PA model into desired and distortion parts.

    Returns (u, d) with u = alpha1*x and d = alpha3*sigma^3*H3(x/sigma);
    u + d is the third-order model of the PA output, not the exact output.
    """
    x = np.asarray(x)
    u = model.alpha1 * x
    d = model.alpha3 * model.sigma_x ** 3 * hermite_h3(x / model.sigma_x)
    return u, d


def backoff_sigma(params: PaParams, ibo_db):
    """Input standard deviation at the given back-off: sigma^2 = r_o^2 10^(-ibo/10)."""
    if not np.isfinite(ibo_db):
        raise ValueError("ibo_db must be finite")
    return params.r_o * 10.0 ** (-float(ibo_db) / 20.0)


def apply_backoff(x, params: PaParams, ibo_db):
    """Scale a signal to the back-off operating point.

    Returns (scaled, sigma_x) where scaled has rms sigma_x =
    r_o * 10^(-ibo/20).  Raises on zero-power input.
    """
    x = np.asarray(x)
    power = np.mean(np.abs(x) ** 2)
    if power == 0:
        raise ValueError("cannot back off a zero-power signal")
    sigma_x = backoff_sigma(params, ibo_db)
    return x * (sigma_x / np.sqrt(power)), float(sigma_x)
