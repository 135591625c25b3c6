# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twin of _kernels_py.cell_obj_grad; same math, C loops.

Kept line-for-line comparable with the fallback so divergences stay obvious;
the test suite asserts numerical agreement between the two backends.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport log, log1p, INFINITY

cdef double LN2 = 0.6931471805599453


def cell_obj_grad(double p, double tau, double[:, ::1] n, double[:, ::1] c,
                  double[:, ::1] w, double[:, ::1] ve, double[:, ::1] i_ext,
                  long[:, ::1] order, double m_ant, double t_block, double bs_hz,
                  double eta_ee, double bs_chain_w, double user_term_w,
                  double lam, double rho, double p_glob,
                  bint oma, double act_tol, bint want_grad=True):
    cdef Py_ssize_t u_n = n.shape[0]
    cdef Py_ssize_t s_n = n.shape[1]
    cdef Py_ssize_t ui, si, pos, dev, flat_u, flat_s, occ_u
    cdef double wit, zeta, zp, acc, dval, den_v, gamma_v, arr_log_v, vfac_v
    cdef double x_v, log_v, occ_sum, occ_max, n_max, energy, obj, rate_sum
    cdef double gp, gtau, lfac_v, common_v, dzeta, best_n

    wit = t_block - tau
    zeta = tau / wit
    zp = zeta * p
    dzeta = t_block / (wit * wit)

    den = np.empty((u_n, s_n))
    gamma = np.empty((u_n, s_n))
    logt = np.empty((u_n, s_n))
    lfac = np.empty((u_n, s_n))
    vfc = np.empty((u_n, s_n))
    alog = np.empty((u_n, s_n))
    gn = np.zeros((u_n, s_n))
    gc = np.zeros((u_n, s_n))
    cdef double[:, ::1] den_m = den, gamma_m = gamma, logt_m = logt
    cdef double[:, ::1] lfac_m = lfac, vfc_m = vfc, alog_m = alog
    cdef double[:, ::1] gn_m = gn, gc_m = gc

    # own-cell interference accumulated along the decode order, weakest first
    for si in range(s_n):
        for ui in range(u_n):
            den_m[ui, si] = ve[ui, si]
    if not oma:
        for si in range(s_n):
            acc = 0.0
            for pos in range(u_n - 1, -1, -1):
                dev = order[si, pos]
                den_m[dev, si] += acc
                acc += c[dev, si] * w[dev, si]

    rate_sum = 0.0
    occ_sum = 0.0
    n_max = -INFINITY
    flat_u = -1
    flat_s = -1
    for ui in range(u_n):
        for si in range(s_n):
            den_v = zp * den_m[ui, si] + i_ext[ui, si]
            den_m[ui, si] = den_v
            gamma_v = zp * w[ui, si] / den_v
            gamma_m[ui, si] = gamma_v
            arr_log_v = log(m_ant / n[ui, si])
            alog_m[ui, si] = arr_log_v
            vfac_v = (1.0 + arr_log_v) * n[ui, si]
            vfc_m[ui, si] = vfac_v
            x_v = vfac_v * gamma_v
            log_v = log1p(x_v) / LN2
            logt_m[ui, si] = log_v
            rate_sum += c[ui, si] * wit * bs_hz * log_v
            lfac_m[ui, si] = c[ui, si] * wit * bs_hz / (LN2 * (1.0 + x_v))
            if c[ui, si] > act_tol and n[ui, si] > n_max:
                n_max = n[ui, si]
                flat_u = ui
                flat_s = si
    for si in range(s_n):
        occ_max = c[0, si]
        for ui in range(1, u_n):
            if c[ui, si] > occ_max:
                occ_max = c[ui, si]
        occ_sum += occ_max
    if flat_u < 0:
        n_max = 0.0

    energy = (bs_chain_w * n_max + user_term_w) * t_block + p * tau * occ_sum
    obj = rate_sum - eta_ee * energy - lam * (p - p_glob) \
        - 0.5 * rho * (p - p_glob) * (p - p_glob)
    if not want_grad:
        return obj, 0.0, 0.0, None, None

    gp = -eta_ee * tau * occ_sum - lam - rho * (p - p_glob)
    gtau = -eta_ee * p * occ_sum
    for ui in range(u_n):
        for si in range(s_n):
            common_v = w[ui, si] * i_ext[ui, si] / (den_m[ui, si] * den_m[ui, si])
            lfac_v = lfac_m[ui, si]
            gp += lfac_v * vfc_m[ui, si] * zeta * common_v
            gtau += -c[ui, si] * bs_hz * logt_m[ui, si] \
                + lfac_v * vfc_m[ui, si] * p * common_v * dzeta
            gn_m[ui, si] = lfac_v * gamma_m[ui, si] * alog_m[ui, si]
            gc_m[ui, si] = wit * bs_hz * logt_m[ui, si]
    if flat_u >= 0:
        gn_m[flat_u, flat_s] -= eta_ee * bs_chain_w * t_block
    for si in range(s_n):
        occ_u = 0
        occ_max = c[0, si]
        for ui in range(1, u_n):
            if c[ui, si] > occ_max:
                occ_max = c[ui, si]
                occ_u = ui
        gc_m[occ_u, si] -= eta_ee * p * tau
    if not oma:
        for si in range(s_n):
            acc = 0.0
            for pos in range(u_n):
                dev = order[si, pos]
                gc_m[dev, si] -= zp * w[dev, si] * acc
                acc += lfac_m[dev, si] * vfc_m[dev, si] * gamma_m[dev, si] / den_m[dev, si]
    return obj, gp, gtau, gn, gc
