"""Channel generation, CSI estimation, and the harvest-then-transmit energy model.

Randomness
----------
All draws derive from ``NetworkConfig.rng_seed`` through numpy SeedSequence
spawn keys, one independent stream per logical entity:

    (STREAM_CHANNEL, k, u, s)   fading vector of device u on subcarrier s, cell k
    (STREAM_CSI_ERR, k, u, s)   unit-variance estimation-error draw, same entity
    (STREAM_GEOMETRY, k)        device placement inside cell k

so a given entity sees the same channel regardless of array iteration order,
and the estimation error for a fixed seed is one frozen unit draw scaled by
sqrt(sigma_e^2): shrinking the error variance moves every realization toward
the true channel monotonically.
"""

from dataclasses import dataclass

import numpy as np

STREAM_CHANNEL = 0
STREAM_CSI_ERR = 1
STREAM_GEOMETRY = 2


def _stream(seed, *key):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def path_loss_alpha(distance_m, reference_alpha=1.0 / 75.0, reference_distance_m=75.0,
                    exponent=2.0):
    """Amplitude path loss alpha(d) = alpha0 * (d/d0)^(-nu/2).

    Anchored so alpha(d0) equals the reference constant; with nu = 2 this is
    the plain alpha0*d0/d law.
    """
    d = np.asarray(distance_m, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distances must be positive")
    return reference_alpha * (d / reference_distance_m) ** (-exponent / 2.0)


def _complex_normal(rng, shape):
    # unit-variance circularly symmetric entries
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return (re + 1j * im) / np.sqrt(2.0)


@dataclass
class ChannelSet:
    """True small-scale fading vectors, one (U, S, M_k) complex array per cell."""

    h: list
    rng_seed: int

    def gains(self):
        """Squared vector norms ||h||^2, list of (U, S) arrays."""
        return [np.sum(np.abs(hk) ** 2, axis=-1) for hk in self.h]


@dataclass
class EstimatedChannelSet:
    """Estimates h_hat = h - e with e ~ CN(0, sigma_e^2 I)."""

    h_hat: list
    sigma_e2: float
    rng_seed: int

    def gains(self):
        return [np.sum(np.abs(hk) ** 2, axis=-1) for hk in self.h_hat]


def generate_channels(cfg):
    """Draw the full fading state for one scenario realization.

    Every vector entry is an independent CN(0, 1) draw; path loss is applied
    separately in the power expressions, never folded into h.
    """
    cfg.validate()
    m = cfg.antenna_budget()
    h = []
    for k in range(cfg.cells):
        hk = np.empty((cfg.devices, cfg.subcarriers, m[k]), dtype=complex)
        for u in range(cfg.devices):
            for s in range(cfg.subcarriers):
                rng = _stream(cfg.rng_seed, STREAM_CHANNEL, k, u, s)
                hk[u, s] = _complex_normal(rng, m[k])
        h.append(hk)
    return ChannelSet(h=h, rng_seed=cfg.rng_seed)


def estimate_channels(channels, sigma_e2, seed=None):
    """Corrupt true channels into estimates, h_hat = h - e.

    The error is a frozen unit draw per entity scaled by sqrt(sigma_e2), so
    sweeps over the error variance reuse common randomness.
    """
    if sigma_e2 < 0:
        raise ValueError("sigma_e2 must be nonnegative")
    seed = channels.rng_seed if seed is None else seed
    h_hat = []
    for k, hk in enumerate(channels.h):
        u_n, s_n, m_k = hk.shape
        err = np.empty_like(hk)
        for u in range(u_n):
            for s in range(s_n):
                rng = _stream(seed, STREAM_CSI_ERR, k, u, s)
                err[u, s] = _complex_normal(rng, m_k)
        h_hat.append(hk - np.sqrt(sigma_e2) * err)
    return EstimatedChannelSet(h_hat=h_hat, sigma_e2=sigma_e2, rng_seed=seed)


def beamforming_vector(h):
    """Maximum-ratio vector b = h/||h||."""
    h = np.asarray(h)
    norm = np.linalg.norm(h)
    if norm == 0:
        raise ValueError("degenerate channel: zero vector has no beam direction")
    return h / norm


def _check_tau(tau, t_block):
    if np.any(np.asarray(tau) < 0) or (
            t_block is not None and np.any(np.asarray(tau) > t_block)):
        raise ValueError("charging time must lie in [0, T]")


def harvested_energy_perfect(h, alpha, p_bs, tau, eta, t_block=None):
    """Energy collected during the charging slot under perfect CSI.

    With maximum-ratio transmission |b^H h|^2 = ||h||^2, so this returns
    eta * tau * alpha^2 * ||h||^2 * p_bs. `h` may be one vector or an
    (..., M) stack. Pass t_block to enforce the tau <= T bound.
    """
    _check_tau(tau, t_block)
    gain = np.sum(np.abs(np.asarray(h)) ** 2, axis=-1)
    return eta * tau * alpha ** 2 * gain * p_bs


def degradation_coefficient(h_hat, sigma_e2):
    """Beamforming-gain surrogate when only an estimate is available:
    sigma_e^2/(1+sigma_e^2) + ||h_hat||^2/(1+sigma_e^2)^2."""
    if sigma_e2 < 0:
        raise ValueError("sigma_e2 must be nonnegative")
    gain = np.sum(np.abs(np.asarray(h_hat)) ** 2, axis=-1)
    return sigma_e2 / (1.0 + sigma_e2) + gain / (1.0 + sigma_e2) ** 2


def harvested_energy_imperfect(h_hat, sigma_e2, alpha, p_bs, tau, eta, t_block=None):
    """Charging-slot energy with estimated CSI; the degradation coefficient
    replaces the true beamforming gain."""
    _check_tau(tau, t_block)
    return eta * tau * alpha ** 2 * degradation_coefficient(h_hat, sigma_e2) * p_bs


def device_distances(cfg):
    """Per-device distances (cells, devices) from the placement policy."""
    if cfg.placement == "fixed":
        d = np.asarray(cfg.device_distance_m, dtype=float)
        if d.ndim == 0:
            d = np.full((cfg.cells, cfg.devices), float(d))
        elif d.shape == (cfg.devices,):
            d = np.tile(d, (cfg.cells, 1))
        elif d.shape != (cfg.cells, cfg.devices):
            raise ValueError("device_distance_m must be scalar, per-device, or per-cell-per-device")
        return d
    if cfg.placement == "uniform":
        d = np.empty((cfg.cells, cfg.devices))
        for k in range(cfg.cells):
            rng = _stream(cfg.rng_seed, STREAM_GEOMETRY, k)
            # uniform over the annulus area between the exclusion radius and the cell edge
            r2 = rng.uniform(cfg.min_distance_m ** 2, cfg.cell_radius_m ** 2, cfg.devices)
            d[k] = np.sqrt(r2)
        return d
    raise ValueError("placement must be 'fixed' or 'uniform'")
