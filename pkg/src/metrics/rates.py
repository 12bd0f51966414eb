"""
Rate metrics.

Effective beam-domain gains g, the hardening-bound rate, the WMMSE
surrogate with its closed-form auxiliary updates, and a Monte-Carlo
ergodic-rate estimator used to validate the bound.

Gain tables are U x U x S arrays indexed g[u, l, s], i.e. the gain seen by
user u from the stream of user l through satellite s.
"""

from typing import Tuple

import numpy as np

from src.channel.channel_model import sample_gains
from src.common.exceptions import NumericError, ShapeError
from src.common.interfaces import BeamformerSet, SchedulingMask, StatisticalCsi, WmmseAux
from src.common.utils import get_logger

logger = get_logger(__name__)


def compute_beam_gains(csi: StatisticalCsi, mask: SchedulingMask, W: BeamformerSet) -> np.ndarray:
    """g[u, l, s] = b[s, u]^T * delta[s, l] * w[s, l].

    Raises:
        ShapeError: If csi, mask and W disagree in dimensions.
    """
    S, U, N = csi.b.shape
    if mask.delta.shape != (S, U):
        raise ShapeError(f"mask is {mask.delta.shape}, csi is {(S, U)}")
    if W.w.shape != (S, U, N):
        raise ShapeError(f"beamformers are {W.w.shape}, expected {(S, U, N)}")
    masked = W.w * mask.delta[:, :, None]
    return np.einsum('sun,sln->uls', csi.b, masked)


def useful_and_disturbance(g: np.ndarray, csi: StatisticalCsi) -> Tuple[np.ndarray, np.ndarray]:
    """Mean useful gain E_u and disturbance Psi_u per user.

    E_u = sum_s alpha[s,u] g[u,u,s];
    Psi_u = sum_s beta[s,u] |g[u,u,s]|^2 + sum_{l != u} g_ul^H T_u g_ul + sigma^2.
    """
    U = g.shape[0]
    diag = g[np.arange(U), np.arange(U), :]
    useful = np.sum(csi.alpha_bar.T * diag, axis=1)
    variance = np.sum(csi.beta.T * np.abs(diag) ** 2, axis=1)
    quad = np.einsum('uls,ust,ult->ul', g.conj(), csi.correlation, g).real
    interference = quad.sum(axis=1) - np.diag(quad)
    return useful, variance + interference + csi.noise_power


def sinr(g: np.ndarray, csi: StatisticalCsi) -> np.ndarray:
    """Hardening-bound SINR per user."""
    useful, psi = useful_and_disturbance(g, csi)
    return np.abs(useful) ** 2 / psi


def rate_lower_bound(g: np.ndarray, csi: StatisticalCsi) -> np.ndarray:
    """Ergodic-rate lower bound per user, bits/s/Hz."""
    return np.log2(1.0 + sinr(g, csi))


def sum_rate(g: np.ndarray, csi: StatisticalCsi) -> float:
    """Sum over users of the rate lower bound, bits/s/Hz."""
    return float(np.sum(rate_lower_bound(g, csi)))


def mse_terms(aux: WmmseAux, g: np.ndarray, csi: StatisticalCsi) -> np.ndarray:
    """Upsilon_u = |1 - mu_u E_u|^2 + |mu_u|^2 Psi_u."""
    useful, psi = useful_and_disturbance(g, csi)
    return np.abs(1.0 - aux.mu * useful) ** 2 + np.abs(aux.mu) ** 2 * psi


def wmmse_objective(aux: WmmseAux, g: np.ndarray, csi: StatisticalCsi) -> float:
    """Sum over users of nu_u * Upsilon_u - ln(nu_u), in nats."""
    upsilon = mse_terms(aux, g, csi)
    return float(np.sum(aux.nu * upsilon - np.log(aux.nu)))


def weighted_mse(aux: WmmseAux, g: np.ndarray, csi: StatisticalCsi) -> float:
    """The beamformer sub-objective sum_u nu_u * Upsilon_u."""
    return float(np.sum(aux.nu * mse_terms(aux, g, csi)))


def update_mu(g: np.ndarray, csi: StatisticalCsi) -> np.ndarray:
    """Closed-form MMSE receive scalar mu_u = E_u^* / (|E_u|^2 + Psi_u)."""
    useful, psi = useful_and_disturbance(g, csi)
    return useful.conj() / (np.abs(useful) ** 2 + psi)


def update_nu(aux: WmmseAux, g: np.ndarray, csi: StatisticalCsi) -> np.ndarray:
    """Closed-form MSE weight nu_u = 1 / Upsilon_u.

    Raises:
        NumericError: If some Upsilon_u vanishes.
    """
    upsilon = mse_terms(aux, g, csi)
    if np.any(upsilon <= 0.0) or not np.all(np.isfinite(upsilon)):
        raise NumericError("degenerate MSE term while updating nu")
    return 1.0 / upsilon


def optimal_aux(g: np.ndarray, csi: StatisticalCsi) -> WmmseAux:
    """mu then nu, both at their closed-form optima for g."""
    mu = update_mu(g, csi)
    nu = update_nu(WmmseAux(mu=mu, nu=np.ones_like(mu.real)), g, csi)
    return WmmseAux(mu=mu, nu=nu)


def monte_carlo_rate(csi: StatisticalCsi, mask: SchedulingMask, W: BeamformerSet, n_samples: int,
                     rng: np.random.Generator, batch: int = 2000) -> Tuple[np.ndarray, np.ndarray]:
    """Ergodic-rate estimate with receiver knowledge of the realized gains.

    Works with the normalized gain alpha / (1 + j), whose mean, variance and
    second moments are exactly the terms of the hardening bound; with beta = 0
    the estimate therefore equals the bound.

    Returns:
        Per-user mean rate (bits/s/Hz) and its standard error.

    Raises:
        ValueError: If n_samples < 1000.
    """
    if n_samples < 1000:
        raise ValueError("n_samples must be at least 1000")
    g = compute_beam_gains(csi, mask, W)
    U = g.shape[0]
    eye = np.eye(U, dtype=bool)
    total = np.zeros(U)
    total_sq = np.zeros(U)
    done = 0
    while done < n_samples:
        count = min(batch, n_samples - done)
        alpha = sample_gains(csi, rng, count) / (1.0 + 1.0j)
        gamma = np.einsum('nsu,uls->nul', alpha, g)
        power = np.abs(gamma) ** 2
        signal = power[:, eye]
        interference = np.where(eye[None], 0.0, power).sum(axis=2)
        rates = np.log2(1.0 + signal / (interference + csi.noise_power))
        total += rates.sum(axis=0)
        total_sq += (rates ** 2).sum(axis=0)
        done += count
    mean = total / n_samples
    var = np.maximum(total_sq / n_samples - mean ** 2, 0.0) * n_samples / (n_samples - 1)
    return mean, np.sqrt(var / n_samples)
