"""Kernel backend selection and per-cell problem assembly.

The per-cell objective/gradient kernel exists twice: a Cython extension
(wptnoma._core) built at install time and a pure-numpy fallback. Import picks
the compiled one when present; set WPTNOMA_PURE_PYTHON=1 to force the
fallback. Both produce the same numbers up to summation-order rounding.
"""

import os
from dataclasses import dataclass

import numpy as np

from . import _kernels_py

if os.environ.get("WPTNOMA_PURE_PYTHON"):
    _impl = _kernels_py
else:
    try:
        from . import _core as _impl
    except ImportError:
        _impl = _kernels_py

cell_obj_grad = _impl.cell_obj_grad


def backend_name():
    return "python" if _impl is _kernels_py else "compiled"


def signal_coefficients(scn):
    """Per-(k,u,s) coefficients of zeta_k * P_k in the uplink powers.

    Received signal power is q = zeta*P * w and the estimation-noise floor is
    I_e = zeta*P * ve; both inherit the harvest-then-transmit scaling, so the
    kernels only ever see these static coefficients.
    """
    a2 = scn.alpha[:, :, None] ** 2
    wpt = scn.wpt_gain()
    w = wpt * a2 * scn.sinr_gain
    ve = wpt * a2 * scn.sigma_e2
    return w, ve


@dataclass
class CellProblem:
    """Static arrays one cell's local solve needs, kernel-ready dtypes."""

    w: np.ndarray        # (U,S) signal coefficient
    ve: np.ndarray       # (U,S) estimation-noise coefficient
    order: np.ndarray    # (S,U) decode order, strongest first
    m_ant: float
    oma: bool


def build_cell_problems(scn):
    w, ve = signal_coefficients(scn)
    oma = scn.mode == "oma"
    probs = []
    for k in range(scn.k_cells):
        probs.append(CellProblem(
            w=np.ascontiguousarray(w[k], dtype=np.float64),
            ve=np.ascontiguousarray(ve[k], dtype=np.float64),
            order=np.ascontiguousarray(scn.decode_order[k], dtype=np.int64),
            m_ant=float(scn.m_antennas[k]),
            oma=oma,
        ))
    return probs


def external_interference(scn, p, tau, c, w=None):
    """Frozen inter-cell interference plus noise, (K,U,S).

    Every device in cell k on subcarrier s sees the other cells' scheduled
    received powers, evaluated at the (p, tau, c) snapshot passed in.
    """
    if w is None:
        w = signal_coefficients(scn)[0]
    wit = scn.t_block - tau
    zp = np.where(wit > 0, tau / np.where(wit > 0, wit, 1.0), np.inf) * p
    per_cell = (c * w).sum(axis=1) * zp[:, None]          # (K,S)
    inter = per_cell.sum(axis=0)[None, :] - per_cell
    i_ext = np.empty((scn.k_cells, scn.u_devices, scn.s_carriers))
    i_ext[:] = inter[:, None, :] + scn.noise_w
    return i_ext
