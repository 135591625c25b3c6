"""Distributed consensus ADMM over cells.

Each cell k owns a local copy (P~_k, tau_k, N_k, C_k) of its block and the
network keeps one global power P_k per cell tied by the consensus constraint
P~_k = P_k. One iteration runs global update -> per-cell local updates ->
multiplier update, stopping when every squared residual (P~_k - P_k)^2 drops
to epsilon. Local subproblems are solved by projected block-gradient ascent
with backtracking; inter-cell interference is frozen at the iteration start
from the other cells' latest local variables, so the K local solves are
independent and could run in parallel.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels, metrics
from .scenario import Allocation

# tau stays below T by this fraction of T; keeps 1/(T - tau) finite
TAU_DELTA_FRAC = 1e-6

ARMIJO_SIGMA = 1e-4
MAX_BACKTRACKS = 50


class AdmmDivergenceError(RuntimeError):
    pass


@dataclass
class AdmmState:
    p_global: np.ndarray      # (K,)
    p_local: np.ndarray       # (K,)
    tau: np.ndarray           # (K,)
    n: np.ndarray             # (K,U,S)
    c: np.ndarray             # (K,U,S)
    lam: np.ndarray           # (K,)
    rho: float
    iteration: int = 0
    local_obj: np.ndarray = None
    local_converged: np.ndarray = None

    def copy(self):
        st = AdmmState(self.p_global.copy(), self.p_local.copy(), self.tau.copy(),
                       self.n.copy(), self.c.copy(), self.lam.copy(), self.rho,
                       self.iteration)
        if self.local_obj is not None:
            st.local_obj = self.local_obj.copy()
        if self.local_converged is not None:
            st.local_converged = self.local_converged.copy()
        return st


def tau_upper(scn):
    return scn.t_block * (1.0 - TAU_DELTA_FRAC)


def tau_bounds(scn):
    """Charging-slot box: degenerate when the scenario pins tau."""
    if scn.tau_fixed is not None:
        return float(scn.tau_fixed), float(scn.tau_fixed)
    return 0.0, tau_upper(scn)


def init_state(scn, rho):
    """Multipliers at zero, locals at box midpoints, global power at P_max/2."""
    k, u, s = scn.k_cells, scn.u_devices, scn.s_carriers
    p0 = scn.p_fixed if scn.p_fixed is not None else scn.p_max / 2.0
    n0 = np.empty((k, u, s))
    n0[:] = ((antenna_floor(scn) + scn.m_antennas) / 2.0)[:, None, None]
    tau_lo, tau_hi = tau_bounds(scn)
    return AdmmState(
        p_global=np.full(k, float(p0)),
        p_local=np.full(k, float(p0) if scn.p_fixed is not None else scn.p_max / 2.0),
        tau=np.full(k, (tau_lo + tau_hi) / 2.0),
        n=n0,
        c=np.full((k, u, s), 0.5),
        lam=np.zeros(k),
        rho=float(rho),
        local_obj=np.zeros(k),
        local_converged=np.ones(k, dtype=bool),
    )


def allocation_from_state(state):
    """Relaxed allocation with consensus powers."""
    return Allocation(p=state.p_global.copy(), tau=state.tau.copy(),
                      n=state.n.copy(), c=state.c.copy())


def _zp_cap(scn, k):
    """Largest zeta*P keeping every device of cell k under P_user,max (C3)."""
    wmax = float(scn.wpt_gain()[k].max())
    if wmax <= 0.0:
        return np.inf
    return scn.p_user_max / wmax


@dataclass
class _CellBox:
    p_lo: float
    p_hi: float
    tau_lo: float
    tau_hi: float
    t_block: float
    n_lo: float
    n_hi: float
    zp_cap: float
    oma: bool
    locked: np.ndarray = None   # (U,S) pairs forced to c = 0


def antenna_floor(scn):
    """Lower antenna bound per cell: 1 with selection, M without."""
    if scn.cfg.antenna_selection:
        return np.ones(scn.k_cells)
    return scn.m_antennas.astype(float)


def _cell_box(scn, k):
    if scn.p_fixed is not None:
        p_lo = p_hi = float(scn.p_fixed)
    else:
        p_lo, p_hi = 0.0, float(scn.p_max)
    tau_lo, tau_hi = tau_bounds(scn)
    return _CellBox(p_lo=p_lo, p_hi=p_hi, tau_lo=tau_lo, tau_hi=tau_hi,
                    t_block=float(scn.t_block),
                    n_lo=float(antenna_floor(scn)[k]),
                    n_hi=float(scn.m_antennas[k]), zp_cap=_zp_cap(scn, k),
                    oma=scn.mode == "oma")


def _simplex_cap(c):
    """Project each column of c onto {0 <= c <= 1, sum_u c <= 1}."""
    out = np.clip(c, 0.0, 1.0)
    over = out.sum(axis=0) > 1.0
    if not np.any(over):
        return out
    for si in np.nonzero(over)[0]:
        v = c[:, si]
        srt = np.sort(v)[::-1]
        css = np.cumsum(srt) - 1.0
        idx = np.arange(1, v.size + 1)
        cond = srt - css / idx > 0
        rho_i = idx[cond][-1]
        theta = css[rho_i - 1] / rho_i
        out[:, si] = np.clip(v - theta, 0.0, None)
    return out


def _project(p, tau, n, c, box):
    tau = min(max(tau, box.tau_lo), box.tau_hi)
    p = min(max(p, box.p_lo), box.p_hi)
    if np.isfinite(box.zp_cap) and tau > 0.0:
        # C3 couples p and tau through zeta = tau/(T - tau); shed the violation
        # onto whichever of the two is free (with both pinned it stays visible
        # in the constraint flags)
        zeta = tau / (box.t_block - tau)
        if p * zeta > box.zp_cap:
            if box.p_lo < box.p_hi:
                p = max(box.p_lo, min(p, box.zp_cap / zeta))
            elif box.tau_lo < box.tau_hi:
                z = box.zp_cap / box.p_hi
                tau = min(tau, z * box.t_block / (1.0 + z))
    n = np.clip(n, box.n_lo, box.n_hi)
    if box.oma:
        c = _simplex_cap(c)
    else:
        c = np.clip(c, 0.0, 1.0)
    if box.locked is not None:
        c = np.where(box.locked, 0.0, c)
    return p, tau, n, c


@dataclass
class LocalResult:
    p: float
    tau: float
    n: np.ndarray
    c: np.ndarray
    objective: float
    iterations: int
    converged: bool


def _cell_rates(prob, scn, p, tau, n, c, i_ext_k):
    """Per-(u,s) instantaneous rates at a local point, interference frozen."""
    wit = scn.t_block - tau
    zp = (tau / wit) * p
    dval = prob.ve.copy()
    if not prob.oma:
        cw = c * prob.w
        for si in range(c.shape[1]):
            idx = prob.order[si]
            sortd = cw[idx, si]
            suffix = np.flip(np.cumsum(np.flip(sortd)))
            dval[idx, si] += suffix - sortd
    gamma = zp * prob.w / (zp * dval + i_ext_k)
    return scn.bs_hz * np.log2(1.0 + (1.0 + np.log(prob.m_ant / n)) * n * gamma)


def _ascend(eval_fg, x0, box, inner_tol, max_inner):
    """Projected block-gradient ascent with per-block backtracking.

    Stops at objective-scaled gradient-projection norm <= inner_tol, on a
    stalled pass (no block can improve), or after max_inner passes.
    """
    p, tau, n, c = x0
    p, tau, n, c = _project(p, tau, n, c, box)
    f_cur = eval_fg(p, tau, n, c, False)[0]

    width_p = max(box.p_hi - box.p_lo, 1e-12)
    steps = {"c": None, "n": None, "tau": None, "p": None}
    widths = {"c": 1.0, "n": max(box.n_hi - box.n_lo, 1.0),
              "tau": max(box.tau_hi - box.tau_lo, 1e-12), "p": width_p}
    blocks = ["c", "n", "tau", "p"]
    if box.p_lo == box.p_hi:
        blocks.remove("p")
    if box.tau_lo == box.tau_hi:
        blocks.remove("tau")
    if box.n_lo >= box.n_hi:
        blocks.remove("n")

    it = 0
    converged = False
    for it in range(1, max_inner + 1):
        obj, gp, gtau, gn, gc = eval_fg(p, tau, n, c, True)
        f_cur = obj
        grads = {"c": gc, "n": gn, "tau": gtau, "p": gp}

        t_ref = 1.0 / (1.0 + abs(f_cur))
        pr, taur, nr, cr = _project(p + t_ref * gp, tau + t_ref * gtau,
                                    n + t_ref * gn, c + t_ref * gc, box)
        gp_norm = max(abs(pr - p), abs(taur - tau),
                      float(np.max(np.abs(nr - n))), float(np.max(np.abs(cr - c))))
        if gp_norm <= inner_tol:
            converged = True
            break

        moved_any = False
        for bi, b in enumerate(blocks):
            if bi > 0:
                obj, gp, gtau, gn, gc = eval_fg(p, tau, n, c, True)
                f_cur = obj
                grads = {"c": gc, "n": gn, "tau": gtau, "p": gp}
            g = grads[b]
            gmax = float(np.max(np.abs(g))) if isinstance(g, np.ndarray) else abs(g)
            if gmax == 0.0:
                continue
            if steps[b] is None:
                steps[b] = 0.25 * widths[b] / gmax
            t = steps[b]
            for _ in range(MAX_BACKTRACKS):
                cand = [p, tau, n, c]
                idx = {"p": 0, "tau": 1, "n": 2, "c": 3}[b]
                cand[idx] = cand[idx] + t * g
                cp, ctau, cn, cc = _project(*cand, box)
                d2 = ((cp - p) ** 2 + (ctau - tau) ** 2
                      + float(np.sum((cn - n) ** 2)) + float(np.sum((cc - c) ** 2)))
                if d2 == 0.0:
                    break
                f_new = eval_fg(cp, ctau, cn, cc, False)[0]
                if f_new >= f_cur + ARMIJO_SIGMA * d2 / t:
                    p, tau, n, c = cp, ctau, cn, cc
                    f_cur = f_new
                    steps[b] = t * 2.0
                    moved_any = True
                    break
                t *= 0.5
            else:
                steps[b] = t
        if not moved_any:
            # no ascent direction survives backtracking: numerically optimal
            converged = True
            break
    return (p, tau, n, c), f_cur, it, converged


def local_update(state, k, scn, eta, probs=None, i_ext=None, params=None):
    """Solve cell k's subproblem over (P~, tau, N, C) on its constraint box.

    Frozen interference and the fresh global power come from state unless
    passed explicitly. Violated rate floors are handled by deactivation:
    the offending pair's c is locked to zero and the ascent resumes.
    """
    if params is None:
        params = scn.cfg.solver
    if probs is None:
        probs = kernels.build_cell_problems(scn)
    if i_ext is None:
        i_ext = kernels.external_interference(scn, state.p_local, state.tau, state.c)
    prob = probs[k]
    i_ext_k = np.ascontiguousarray(i_ext[k])
    box = _cell_box(scn, k)
    user_term = scn.u_devices * scn.user_chain_w
    lam = float(state.lam[k])
    rho = float(state.rho)
    p_glob = float(state.p_global[k])

    def eval_fg(p, tau, n, c, want_grad):
        return kernels.cell_obj_grad(
            float(p), float(tau), np.ascontiguousarray(n), np.ascontiguousarray(c),
            prob.w, prob.ve, i_ext_k, prob.order, prob.m_ant, scn.t_block,
            scn.bs_hz, float(eta), scn.bs_chain_w, user_term, lam, rho, p_glob,
            prob.oma, metrics.ACT_TOL, want_grad)

    x = (float(state.p_local[k]), float(state.tau[k]),
         state.n[k].copy(), state.c[k].copy())
    total_iters = 0
    converged = True
    for _ in range(scn.u_devices * scn.s_carriers + 1):
        x, f_cur, iters, conv = _ascend(eval_fg, x, box,
                                        params.inner_tol, params.max_inner_iters)
        total_iters += iters
        converged = conv
        p, tau, n, c = x
        rates = _cell_rates(prob, scn, p, tau, n, c, i_ext_k)
        viol = (c > metrics.ACT_TOL) & (rates < scn.rmin_bits - 1e-12)
        if not np.any(viol):
            break
        locked = viol if box.locked is None else (box.locked | viol)
        box.locked = locked
        c = np.where(locked, 0.0, c)
        x = (p, tau, n, c)
    p, tau, n, c = x
    return LocalResult(p=p, tau=tau, n=n, c=c, objective=f_cur,
                       iterations=total_iters, converged=converged)


def global_update(state, scn):
    """Consensus power per cell: clamp(P~_k + lambda_k / rho, 0, P_max)."""
    if scn.p_fixed is not None:
        state.p_global[:] = scn.p_fixed
        return state.p_global
    state.p_global[:] = np.clip(state.p_local + state.lam / state.rho,
                                0.0, scn.p_max)
    return state.p_global


def multiplier_update(state):
    state.lam += state.rho * (state.p_local - state.p_global)
    return state.lam


def residual(state):
    """Per-cell squared consensus residuals (P~_k - P_k)^2."""
    return (state.p_local - state.p_global) ** 2


def _in_box(scn, state, atol=1e-9):
    if np.any(state.p_local < -atol) or np.any(state.p_local > scn.p_max + atol):
        return False
    if scn.p_fixed is not None and np.any(np.abs(state.p_local - scn.p_fixed) > atol):
        return False
    tau_lo, tau_hi = tau_bounds(scn)
    if np.any(state.tau < tau_lo - atol) or np.any(state.tau > tau_hi + atol):
        return False
    m = scn.m_antennas[:, None, None]
    n_lo = antenna_floor(scn)[:, None, None]
    if np.any(state.n < n_lo - atol) or np.any(state.n > m + atol):
        return False
    if np.any(state.c < -atol) or np.any(state.c > 1.0 + atol):
        return False
    if scn.mode == "oma" and np.any(state.c.sum(axis=1) > 1.0 + atol):
        return False
    wit = scn.t_block - state.tau
    zp = np.where(wit > 0, state.tau / np.where(wit > 0, wit, 1.0), np.inf) * state.p_local
    p_dev_max = zp[:, None, None] * scn.wpt_gain()
    if np.any(p_dev_max > scn.p_user_max + 1e-7 * scn.p_user_max + atol):
        return False
    return True


def augmented_lagrangian(state, scn, eta, i_ext=None, probs=None):
    """Minimization-form augmented Lagrangian:

        sum_k g_k + sum_k lam_k (P~_k - P_k) + rho/2 sum_k (P~_k - P_k)^2

    with g_k the negated per-cell subtractive objective, +inf outside the
    local constraint set. Pass i_ext to hold interference frozen across an
    update when checking descent.
    """
    if not _in_box(scn, state):
        return np.inf
    if probs is None:
        probs = kernels.build_cell_problems(scn)
    if i_ext is None:
        i_ext = kernels.external_interference(scn, state.p_local, state.tau, state.c)
    user_term = scn.u_devices * scn.user_chain_w
    total = 0.0
    for k in range(scn.k_cells):
        obj = kernels.cell_obj_grad(
            float(state.p_local[k]), float(state.tau[k]),
            np.ascontiguousarray(state.n[k]), np.ascontiguousarray(state.c[k]),
            probs[k].w, probs[k].ve, np.ascontiguousarray(i_ext[k]),
            probs[k].order, probs[k].m_ant, scn.t_block, scn.bs_hz, float(eta),
            scn.bs_chain_w, user_term, float(state.lam[k]), float(state.rho),
            float(state.p_global[k]), probs[k].oma, metrics.ACT_TOL, False)[0]
        total -= obj
    return total


def local_objective(scn, k, p, tau, n, c, eta, i_ext_k, probs=None):
    """Plain per-cell subtractive objective (no consensus terms); the function
    whose concavity over (P~, tau, N) the convexity spot-checks probe."""
    if probs is None:
        probs = kernels.build_cell_problems(scn)
    prob = probs[k]
    user_term = scn.u_devices * scn.user_chain_w
    return kernels.cell_obj_grad(
        float(p), float(tau), np.ascontiguousarray(n, dtype=float),
        np.ascontiguousarray(c, dtype=float), prob.w, prob.ve,
        np.ascontiguousarray(i_ext_k), prob.order, prob.m_ant, scn.t_block,
        scn.bs_hz, float(eta), scn.bs_chain_w, user_term, 0.0, 0.0, 0.0,
        prob.oma, metrics.ACT_TOL, False)[0]


@dataclass
class AdmmRun:
    iterations: int
    converged: bool
    rows: list
    ee: float
    state: AdmmState
    local_converged: np.ndarray = None


def admm_solve(scn, eta, rho=None, epsilon=None, max_iters=None, init=None,
               params=None):
    """Run consensus ADMM at a fixed eta; returns (relaxed alloc, AdmmRun).

    Aborts with AdmmDivergenceError when the smallest per-cell residual grows
    for 10 consecutive iterations.
    """
    if params is None:
        params = scn.cfg.solver
    rho = float(params.rho if rho is None else rho)
    epsilon = float(params.epsilon if epsilon is None else epsilon)
    max_iters = int(params.max_iters if max_iters is None else max_iters)
    if rho <= 0 or epsilon <= 0:
        raise ValueError("rho and epsilon must be positive")

    if init is not None:
        state = init.copy()
        state.rho = rho
    else:
        state = init_state(scn, rho)
    probs = kernels.build_cell_problems(scn)
    rows = []
    prev_min = np.inf
    growing = 0
    converged = False
    t = 0
    for t in range(1, max_iters + 1):
        global_update(state, scn)
        i_ext = kernels.external_interference(scn, state.p_local, state.tau, state.c)
        for k in range(scn.k_cells):
            res = local_update(state, k, scn, eta, probs, i_ext, params)
            state.p_local[k] = res.p
            state.tau[k] = res.tau
            state.n[k] = res.n
            state.c[k] = res.c
            state.local_obj[k] = res.objective
            state.local_converged[k] = res.converged
        multiplier_update(state)
        r = residual(state)
        state.iteration = t
        for k in range(scn.k_cells):
            rows.append((t, k, float(state.p_local[k]), float(state.p_global[k]),
                         float(state.lam[k]), float(r[k]), float(state.local_obj[k])))
        if np.all(r <= epsilon):
            converged = True
            break
        r_min = float(r.min())
        if r_min > prev_min:
            growing += 1
        else:
            growing = 0
        prev_min = r_min
        if growing >= 10:
            raise AdmmDivergenceError(
                "consensus diverging: min-cell residual grew for 10 consecutive "
                "iterations (iteration %d, rho=%g, residuals=%s)"
                % (t, rho, np.array2string(r, precision=3)))
    alloc = allocation_from_state(state)
    ee = metrics.energy_efficiency(scn, alloc).ee
    run = AdmmRun(iterations=t, converged=converged, rows=rows, ee=ee,
                  state=state, local_converged=state.local_converged.copy())
    return alloc, run


def round_antennas(alloc):
    """Floor the relaxed antenna counts (never below one); everything else
    unchanged. Flooring never increases the BS chain power term."""
    out = alloc.copy()
    out.n = np.clip(np.floor(out.n), 1.0, None)
    return out


def trace_csv(run, path_or_buf):
    close = False
    if isinstance(path_or_buf, (str, bytes)):
        f = open(path_or_buf, "w")
        close = True
    else:
        f = path_or_buf
    try:
        f.write("iteration,cell,local_p_w,global_p_w,lambda,residual_sq,"
                "local_objective\n")
        for row in run.rows:
            f.write("%d,%d,%s,%s,%s,%s,%s\n" % (
                row[0], row[1], repr(row[2]), repr(row[3]), repr(row[4]),
                repr(row[5]), repr(row[6])))
        f.write("summary,ee,%s,iterations,%d\n" % (repr(run.ee), run.iterations))
    finally:
        if close:
            f.close()
