"""Scenario assembly: config + one channel realization -> evaluation-ready arrays."""

from dataclasses import dataclass, field

import numpy as np

from . import channel as chan
from .config import NetworkConfig, config_hash


@dataclass
class Allocation:
    """One resource-allocation point.

    p        (K,)      BS transmit power per cell, watts
    tau      (K,)      charging-slot length per cell, seconds
    n        (K,U,S)   antennas serving each device/subcarrier pair; integer
                       after rounding, continuous while relaxed
    c        (K,U,S)   subcarrier indicator, binary or relaxed in [0,1]
    """

    p: np.ndarray
    tau: np.ndarray
    n: np.ndarray
    c: np.ndarray

    def copy(self):
        return Allocation(self.p.copy(), self.tau.copy(), self.n.copy(), self.c.copy())


def uniform_allocation(scn, p=None, tau=None, n=None, c=1.0):
    """Convenience constructor: every device gets the same settings."""
    k, u, s = scn.k_cells, scn.u_devices, scn.s_carriers
    p = scn.p_max / 2.0 if p is None else p
    tau = scn.t_block / 2.0 if tau is None else tau
    n_val = scn.m_antennas.astype(float) if n is None else np.broadcast_to(
        np.asarray(n, dtype=float), (k,))
    return Allocation(
        p=np.full(k, float(p)),
        tau=np.full(k, float(tau)),
        n=np.repeat(n_val, u * s).reshape(k, u, s).astype(float),
        c=np.full((k, u, s), float(c)),
    )


@dataclass
class Scenario:
    """Everything the metrics and solvers consume, in plain arrays.

    sinr_gain holds the per-antenna average squared channel magnitude
    ||h||^2 / M (the estimate's under imperfect CSI): the closed-form rate law
    already carries the array factor, so the SINR it scales must be measured
    per receive antenna. harvest_gain keeps the full-array beamforming gain
    (true ||h||^2, or the degradation coefficient under imperfect CSI).
    """

    cfg: NetworkConfig
    k_cells: int
    u_devices: int
    s_carriers: int
    m_antennas: np.ndarray        # (K,)
    t_block: float
    bs_hz: float                  # per-subcarrier bandwidth
    noise_w: float
    eta_wpt: float
    rmin_bits: float              # rate floor in bits/s (rmin_bits_hz * bs_hz)
    p_max: float
    p_user_max: float
    p_fixed: object               # None, or pinned BS power
    tau_fixed: object             # None, or pinned charging-slot length
    bs_chain_w: float
    user_chain_w: float
    mode: str
    csi: str
    sigma_e2: float
    alpha: np.ndarray             # (K,U) amplitude path loss
    sinr_gain: np.ndarray         # (K,U,S)
    harvest_gain: np.ndarray      # (K,U,S)
    decode_order: np.ndarray      # (K,S,U) device indices, strongest first
    seed: int = 0
    cfg_hash: str = ""
    channels: object = field(default=None, repr=False)
    estimates: object = field(default=None, repr=False)

    def wpt_gain(self):
        """eta * alpha^2 * harvest_gain, the harvested energy per (tau * P)."""
        return self.eta_wpt * self.alpha[:, :, None] ** 2 * self.harvest_gain


def build_scenario(cfg: NetworkConfig, channels=None, estimates=None):
    """Realize one scenario: draw channels, estimate if needed, precompute gains."""
    from .metrics import decoding_order

    cfg.validate()
    if channels is None:
        channels = chan.generate_channels(cfg)
    m = cfg.antenna_budget()

    sigma_e2 = float(cfg.csi_error_var) if cfg.csi == "imperfect" else 0.0
    if cfg.csi == "imperfect" and estimates is None:
        estimates = chan.estimate_channels(channels, sigma_e2)

    k, u, s = cfg.cells, cfg.devices, cfg.subcarriers
    sinr_gain = np.empty((k, u, s))
    harvest_gain = np.empty((k, u, s))
    for ki in range(k):
        if cfg.csi == "perfect":
            g_full = np.sum(np.abs(channels.h[ki]) ** 2, axis=-1)
            sinr_gain[ki] = g_full / m[ki]
            harvest_gain[ki] = g_full
        else:
            g_est = np.sum(np.abs(estimates.h_hat[ki]) ** 2, axis=-1)
            sinr_gain[ki] = g_est / m[ki]
            harvest_gain[ki] = chan.degradation_coefficient(estimates.h_hat[ki], sigma_e2)

    order = np.empty((k, s, u), dtype=np.int64)
    for ki in range(k):
        for si in range(s):
            order[ki, si] = decoding_order(sinr_gain[ki, :, si])

    dist = chan.device_distances(cfg)
    alpha = chan.path_loss_alpha(dist, cfg.reference_alpha, cfg.reference_distance_m,
                                 cfg.path_loss_exponent)

    return Scenario(
        cfg=cfg,
        k_cells=k, u_devices=u, s_carriers=s,
        m_antennas=m,
        t_block=cfg.block_seconds,
        bs_hz=cfg.subcarrier_bandwidth(),
        noise_w=cfg.noise_w,
        eta_wpt=cfg.wpt_efficiency,
        rmin_bits=cfg.rmin_bits_hz * cfg.subcarrier_bandwidth(),
        p_max=cfg.bs_power_max_w,
        p_user_max=cfg.user_power_max_w,
        p_fixed=cfg.bs_power_fixed_w,
        tau_fixed=cfg.tau_fixed_s,
        bs_chain_w=cfg.power_model.bs_chain_w,
        user_chain_w=cfg.power_model.user_chain_w,
        mode=cfg.mode,
        csi=cfg.csi,
        sigma_e2=sigma_e2,
        alpha=alpha,
        sinr_gain=sinr_gain,
        harvest_gain=harvest_gain,
        decode_order=order,
        seed=cfg.rng_seed,
        cfg_hash=config_hash(cfg),
        channels=channels,
        estimates=estimates,
    )
