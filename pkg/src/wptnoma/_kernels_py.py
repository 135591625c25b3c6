"""Pure-numpy implementation of the per-cell objective/gradient kernel.

This is the fallback the package selects when the compiled extension is not
available; the Cython twin in _core.pyx must produce the same numbers (up to
summation-order rounding), which the test suite asserts.

The kernel evaluates one cell's contribution to the subtractive objective,

    f = sum_us c * (T - tau) * Bs * log2(1 + arr(N) * gamma)
        - eta_ee * [(Pbs_chain * maxN_active + U * Puser_chain) * T
                    + P * tau * sum_s max_u c]
        - lam * (P - P_global) - rho/2 * (P - P_global)^2

with inter-cell interference frozen in i_ext, and its gradient in
(P, tau, N, C). Own-cell received powers all scale with zeta * P where
zeta = tau/(T - tau), which the closed forms below exploit.
"""

import numpy as np

LN2 = float(np.log(2.0))


def cell_obj_grad(p, tau, n, c, w, ve, i_ext, order, m_ant, t_block, bs_hz,
                  eta_ee, bs_chain_w, user_term_w, lam, rho, p_glob,
                  oma, act_tol, want_grad=True):
    wit = t_block - tau
    zeta = tau / wit
    zp = zeta * p

    dval = ve.copy()
    if not oma:
        cw = c * w
        for si in range(c.shape[1]):
            idx = order[si]
            sortd = cw[idx, si]
            suffix = np.flip(np.cumsum(np.flip(sortd)))
            dval[idx, si] += suffix - sortd

    den = zp * dval + i_ext
    gamma = (zp * w) / den
    arr_log = np.log(m_ant / n)
    vfac = (1.0 + arr_log) * n
    x = vfac * gamma
    log_term = np.log1p(x) / LN2
    rate_term = c * wit * bs_hz * log_term

    occ = c.max(axis=0)
    occ_sum = occ.sum()
    act = c > act_tol
    if act.any():
        n_masked = np.where(act, n, -np.inf)
        flat = int(np.argmax(n_masked))
        n_max = n_masked.ravel()[flat]
    else:
        flat = -1
        n_max = 0.0

    energy = (bs_chain_w * n_max + user_term_w) * t_block + p * tau * occ_sum
    obj = float(rate_term.sum() - eta_ee * energy
                - lam * (p - p_glob) - 0.5 * rho * (p - p_glob) ** 2)
    if not want_grad:
        return obj, 0.0, 0.0, None, None

    lfac = c * wit * bs_hz / (LN2 * (1.0 + x))
    common = w * i_ext / den ** 2
    gp = float((lfac * vfac * zeta * common).sum()
               - eta_ee * tau * occ_sum - lam - rho * (p - p_glob))
    dzeta = t_block / wit ** 2
    gtau = float((-c * bs_hz * log_term + lfac * vfac * p * common * dzeta).sum()
                 - eta_ee * p * occ_sum)

    gn = lfac * gamma * arr_log
    if flat >= 0:
        gn.ravel()[flat] -= eta_ee * bs_chain_w * t_block

    gc = wit * bs_hz * log_term.copy()
    occ_idx = np.argmax(c, axis=0)
    gc[occ_idx, np.arange(c.shape[1])] -= eta_ee * p * tau
    if not oma:
        # cost of interfering with everyone decoded before you
        a = lfac * vfac * gamma / den
        pre = np.empty_like(a)
        for si in range(c.shape[1]):
            idx = order[si]
            sorta = a[idx, si]
            pre[idx, si] = np.cumsum(sorta) - sorta
        gc -= zp * w * pre
    return obj, gp, gtau, gn, gc
