"""
Statistical channel model.

Per-link Rician statistics, UPA steering vectors with the element
radiation pattern, gain correlation matrices T_u and instantaneous channel
samplers used for Monte-Carlo validation.
"""

import math
from typing import Tuple

import numpy as np

from src.common.config import ArrayConfig, ChannelConfig
from src.common.exceptions import DomainError
from src.common.interfaces import AodSet, SceneGeometry, StatisticalCsi
from src.common.utils import db_to_linear, dbm_to_watt, get_logger, wavelength
from src.geometry.constellation import link_distances_m

logger = get_logger(__name__)

PEAK_GAIN = math.sqrt(3.0 / (2.0 * math.pi))
_ANGLE_SLACK = 1e-12


def steering_vector(az, el, arr: ArrayConfig) -> np.ndarray:
    """UPA steering vector, broadcasting over the shape of az/el.

    Entry k*n_v + m is exp(-j*2*pi*(phi_h*k + phi_v*m)) with
    phi_h = d*cos(az)*cos(el) and phi_v = d*sin(az)*cos(el).

    Returns:
        Array of shape az.shape + (n_h * n_v,).
    """
    az = np.asarray(az, dtype=float)
    el = np.asarray(el, dtype=float)
    phi_h = arr.spacing_over_lambda * np.cos(az) * np.cos(el)
    phi_v = arr.spacing_over_lambda * np.sin(az) * np.cos(el)
    ramp_h = np.exp(-2j * np.pi * phi_h[..., None] * np.arange(arr.n_h))
    ramp_v = np.exp(-2j * np.pi * phi_v[..., None] * np.arange(arr.n_v))
    # Kronecker product along the last axis
    a = ramp_h[..., :, None] * ramp_v[..., None, :]
    return a.reshape(az.shape + (arr.n_h * arr.n_v,))


def radiation_gain(off_boresight):
    """Element amplitude gain sqrt(3/(2*pi)) * cos(theta).

    Raises:
        DomainError: If any angle lies outside [0, pi/2].
    """
    theta = np.asarray(off_boresight, dtype=float)
    if np.any(theta < -_ANGLE_SLACK) or np.any(theta > np.pi / 2 + _ANGLE_SLACK):
        raise DomainError("off-boresight angle outside [0, pi/2]")
    gain = PEAK_GAIN * np.cos(np.clip(theta, 0.0, np.pi / 2))
    return float(gain) if gain.ndim == 0 else gain


def path_gain(distance_m, carrier_hz: float):
    """Free-space path gain (lambda / (4*pi*d))^2.

    Raises:
        DomainError: If a distance is not positive.
    """
    distance = np.asarray(distance_m, dtype=float)
    if np.any(distance <= 0.0):
        raise DomainError("link distance must be positive")
    gain = (wavelength(carrier_hz) / (4.0 * np.pi * distance)) ** 2
    return float(gain) if gain.ndim == 0 else gain


def derive_statistics(gamma, kappa) -> Tuple[np.ndarray, np.ndarray]:
    """Per-component Rician mean and variance.

    alpha_bar = sqrt(kappa*gamma / (2*(1+kappa))), beta = gamma / (2*(1+kappa)).
    """
    gamma = np.asarray(gamma, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    alpha_bar = np.sqrt(kappa * gamma / (2.0 * (1.0 + kappa)))
    beta = gamma / (2.0 * (1.0 + kappa))
    return alpha_bar, beta


def build_T(csi: StatisticalCsi, u: int) -> np.ndarray:
    """Gain correlation T_u = alpha_u alpha_u^T + diag(beta_u), S x S."""
    a = csi.alpha_bar[:, u]
    return np.outer(a, a) + np.diag(csi.beta[:, u])


def noise_power(cfg: ChannelConfig) -> float:
    """Thermal noise power in W: N0 + 10*log10(B) + F, in dBm."""
    noise_dbm = cfg.noise_psd_dbm_hz + 10.0 * math.log10(cfg.bandwidth_hz) + cfg.noise_figure_db
    return dbm_to_watt(noise_dbm)


def draw_kappa(shape: Tuple[int, ...], cfg: ChannelConfig, rng: np.random.Generator) -> np.ndarray:
    """Rician factors uniform in dB over kappa_db_range, returned linear."""
    low, high = cfg.kappa_db_range
    return db_to_linear(rng.uniform(low, high, size=shape))


def build_statistical_csi(scene: SceneGeometry, aods: AodSet, cfg: ChannelConfig,
                          rng: np.random.Generator) -> StatisticalCsi:
    """Statistical CSI of every serving link of a drop."""
    distances = link_distances_m(scene)
    gamma = path_gain(distances, cfg.f_c_hz)
    kappa = draw_kappa(gamma.shape, cfg, rng)
    alpha_bar, beta = derive_statistics(gamma, kappa)
    a = steering_vector(aods.az, aods.el, cfg.arrays)
    b = radiation_gain(aods.off_boresight)[..., None] * a
    sigma2 = noise_power(cfg)
    logger.debug(f"Built statistical CSI for {gamma.shape[0]} satellites x {gamma.shape[1]} UTs, "
                 f"noise {sigma2:.3e} W")
    return StatisticalCsi(gamma=gamma, kappa=kappa, alpha_bar=alpha_bar, beta=beta,
                          b=b, noise_power=sigma2, distances_m=distances)


def sample_gains(csi: StatisticalCsi, rng: np.random.Generator, n_samples: int = 1) -> np.ndarray:
    """Complex gains alpha with independent N(alpha_bar, beta) parts.

    Returns:
        n_samples x S x U complex array.
    """
    shape = (n_samples,) + csi.alpha_bar.shape
    std = np.sqrt(csi.beta)
    real = csi.alpha_bar + std * rng.standard_normal(shape)
    imag = csi.alpha_bar + std * rng.standard_normal(shape)
    return real + 1j * imag


def sample_instant_channel(csi: StatisticalCsi, rng: np.random.Generator) -> np.ndarray:
    """One draw of h[s, u] = alpha[s, u] * b[s, u], shape S x U x N."""
    alpha = sample_gains(csi, rng, 1)[0]
    return alpha[:, :, None] * csi.b
