"""Shared helpers: hand-set scenarios with explicit gains, plus the small
reference instance the solver tests reuse."""

import numpy as np
import pytest

from wptnoma.config import NetworkConfig, PowerModel
from wptnoma.metrics import decoding_order
from wptnoma.scenario import Allocation, Scenario, build_scenario

# single cell, two devices sharing one subcarrier, close-in geometry so the
# harvested power is meaningful at reasonable BS power
TINY = dict(cells=1, devices=2, subcarriers=1, antennas=8, bandwidth_hz=1e6,
            block_seconds=1.0, noise_w=1e-6, device_distance_m=35.0,
            rng_seed=11)


def tiny_config(**over):
    base = dict(TINY)
    base.update(over)
    return NetworkConfig(**base).validate()


@pytest.fixture(scope="session")
def tiny_scn():
    return build_scenario(tiny_config())


def make_scenario(k=1, u=2, s=1, m=1, t_block=2.0, bs_hz=1.0, noise_w=0.5,
                  sinr_gain=None, harvest_gain=None, alpha=None, sigma_e2=0.0,
                  mode="noma", eta_wpt=1.0, p_max=100.0, p_user_max=1e12,
                  p_fixed=None, rmin_bits=0.0):
    """Scenario whose gains are set directly instead of drawn from channels.

    Lets tests pin per-device received powers exactly; the config attached is
    only a carrier for solver defaults.
    """
    sg = np.asarray(sinr_gain, dtype=float).reshape(k, u, s)
    hg = np.asarray(harvest_gain, dtype=float).reshape(k, u, s)
    order = np.empty((k, s, u), dtype=np.int64)
    for ki in range(k):
        for si in range(s):
            order[ki, si] = decoding_order(sg[ki, :, si])
    pm = PowerModel()
    return Scenario(
        cfg=NetworkConfig(cells=k, devices=u, subcarriers=s, antennas=m),
        k_cells=k, u_devices=u, s_carriers=s,
        m_antennas=np.full(k, m), t_block=float(t_block), bs_hz=float(bs_hz),
        noise_w=float(noise_w), eta_wpt=float(eta_wpt),
        rmin_bits=float(rmin_bits), p_max=float(p_max),
        p_user_max=float(p_user_max), p_fixed=p_fixed, tau_fixed=None,
        bs_chain_w=pm.bs_chain_w, user_chain_w=pm.user_chain_w,
        mode=mode, csi="imperfect" if sigma_e2 > 0 else "perfect",
        sigma_e2=float(sigma_e2),
        alpha=np.ones((k, u)) if alpha is None else np.asarray(alpha, float),
        sinr_gain=sg, harvest_gain=hg, decode_order=order)


def alloc_of(scn, p, tau, n, c):
    """Allocation from scalars or arrays, broadcast to the scenario shape."""
    k, u, s = scn.k_cells, scn.u_devices, scn.s_carriers
    return Allocation(
        p=np.full(k, float(p)) if np.isscalar(p) else np.asarray(p, dtype=float),
        tau=np.full(k, float(tau)) if np.isscalar(tau) else np.asarray(tau, dtype=float),
        n=np.array(np.broadcast_to(np.asarray(n, dtype=float), (k, u, s))),
        c=np.array(np.broadcast_to(np.asarray(c, dtype=float), (k, u, s))))


def random_feasible_alloc(scn, rng):
    """Interior point of the relaxed constraint set (C3 enforced by scaling)."""
    k, u, s = scn.k_cells, scn.u_devices, scn.s_carriers
    p = rng.uniform(0.05, 1.0, k) * scn.p_max
    tau = rng.uniform(0.05, 0.9, k) * scn.t_block
    n = rng.uniform(1.0, scn.m_antennas[:, None, None].astype(float), (k, u, s))
    c = rng.uniform(0.0, 1.0, (k, u, s))
    if scn.mode == "oma":
        c = c / np.maximum(c.sum(axis=1, keepdims=True), 1.0)
    zp = tau / (scn.t_block - tau) * p
    cap = scn.p_user_max / scn.wpt_gain().reshape(k, -1).max(axis=1)
    over = zp > cap
    p[over] *= (cap / zp)[over]
    return Allocation(p=p, tau=tau, n=n, c=c)
