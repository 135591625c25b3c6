"""Ground-truth tools: exhaustive-search optimizer, finite-difference Hessians,
and Monte-Carlo checks of the antenna-selection rate law.

The exhaustive search shares no code with the consensus solver on purpose; it
recomputes every quantity from the scenario arrays so the two routes can
cross-validate each other.
"""

import itertools
from dataclasses import dataclass, field

import numpy as np

from .scenario import Allocation

TAU_MARGIN = 1e-6  # keep the data slot open: tau <= T * (1 - margin)


class GridBudgetError(ValueError):
    """Requested enumeration exceeds the candidate budget."""


@dataclass
class GridSpec:
    p_points: int = 50
    tau_points: int = 50
    refine_rounds: int = 0
    max_candidates: float = 1e7
    # harvest-then-transmit optima sit at tau << T, so the tau axis is
    # geometric by default; "linear" restores even spacing from 0
    tau_spacing: str = "log"
    tau_floor_frac: float = 1e-4


@dataclass
class OracleResult:
    feasible: bool
    alloc: object = None
    r_tot: float = 0.0
    e_tot: float = 0.0
    ee: float = 0.0
    score: float = -np.inf
    eta: float = 0.0
    objective: str = "ee"
    n_candidates: int = 0
    reason: str = ""

    def report(self, scn):
        """Re-evaluate the winning allocation on the reference metrics path
        (same CSV schema as any other evaluation)."""
        from .metrics import energy_efficiency
        if not self.feasible:
            raise ValueError("infeasible scenario: %s" % self.reason)
        return energy_efficiency(scn, self.alloc)


def _subsets(u, mode):
    """Schedulable device sets for one (cell, subcarrier)."""
    if mode == "oma":
        sets = [()] + [(i,) for i in range(u)]
    else:
        sets = []
        for r in range(u + 1):
            sets.extend(itertools.combinations(range(u), r))
    return [np.array(s, dtype=int) for s in sets]


def _cap_ranges(scn):
    """Per-cell antenna-cap axes; a single point when selection is disabled."""
    from .admm import antenna_floor
    lo = antenna_floor(scn).astype(int)
    return [np.arange(lo[ki], scn.m_antennas[ki] + 1) for ki in range(scn.k_cells)]


def _count_candidates(scn, n_grid, n_sets):
    per_slot = n_sets ** (scn.k_cells * scn.s_carriers)
    n_caps = float(np.prod([float(len(r)) for r in _cap_ranges(scn)]))
    try:
        return float(n_grid) * float(per_slot) * n_caps
    except OverflowError:
        return np.inf


def brute_force_optimum(scn, grid=None, objective="ee", eta=0.0):
    """Exhaustive search over the allocation space.

    Continuous power and charge-time axes are gridded per cell; scheduling
    patterns are enumerated exactly (binary indicators); antenna counts use
    the exact reduction that, for fixed SINRs, the rate law increases with the
    antenna count, so within a cell every scheduled pair shares one cap and
    only the K caps are enumerated. Constraint-violating candidates are
    masked; if nothing survives, an infeasible-scenario result is returned.

    objective: "ee" maximizes throughput/energy, "subtractive" maximizes
    throughput - eta * energy.
    """
    grid = grid or GridSpec()
    k, u, s = scn.k_cells, scn.u_devices, scn.s_carriers
    t = scn.t_block

    if scn.p_fixed is not None:
        p_axes = [np.array([float(scn.p_fixed)])] * k
    else:
        p_axes = [np.linspace(0.0, scn.p_max, grid.p_points)] * k
    tau_hi = t * (1 - TAU_MARGIN)
    if scn.tau_fixed is not None:
        tau_axes = [np.array([float(scn.tau_fixed)])] * k
    elif grid.tau_spacing == "log":
        tau_axes = [np.geomspace(t * grid.tau_floor_frac, tau_hi,
                                 grid.tau_points)] * k
    else:
        tau_axes = [np.linspace(0.0, tau_hi, grid.tau_points)] * k

    best = _search(scn, p_axes, tau_axes, objective, eta, grid)

    for _ in range(grid.refine_rounds):
        if not best.feasible:
            break
        best, p_axes, tau_axes = _refine(scn, best, p_axes, tau_axes,
                                         objective, eta, grid)
    return best


def _axis_zoom(axis_full, center, points):
    """Window of the axis around center, re-sampled finely; each refinement
    round shrinks the window since it receives the previous round's axis."""
    if len(axis_full) == 1:
        return axis_full
    i = int(np.clip(np.searchsorted(axis_full, center), 1, len(axis_full) - 1))
    lo = axis_full[max(i - 2, 0)]
    hi = axis_full[min(i + 1, len(axis_full) - 1)]
    if hi <= lo:
        return np.array([lo])
    return np.linspace(lo, hi, points)


def _refine(scn, incumbent, p_axes, tau_axes, objective, eta, grid):
    """Zoom the continuous axes around the incumbent, keeping its scheduling
    pattern and antenna caps fixed. Returns the better of the two results
    plus the zoomed axes for the next round."""
    p_z = [_axis_zoom(p_axes[k], incumbent.alloc.p[k], grid.p_points)
           for k in range(scn.k_cells)]
    tau_z = [_axis_zoom(tau_axes[k], incumbent.alloc.tau[k], grid.tau_points)
             for k in range(scn.k_cells)]
    cmask = (incumbent.alloc.c > 0.5).astype(float)
    caps = incumbent.alloc.n.reshape(scn.k_cells, -1).max(axis=1).astype(int)
    out = _search(scn, p_z, tau_z, objective, eta, grid,
                  patterns=[cmask], cap_choices=[np.arange(c, c + 1) for c in caps])
    out.n_candidates += incumbent.n_candidates
    return (out if out.score >= incumbent.score else incumbent), p_z, tau_z


def _search(scn, p_axes, tau_axes, objective, eta, grid, patterns=None, cap_choices=None):
    k, u, s = scn.k_cells, scn.u_devices, scn.s_carriers
    t = scn.t_block
    m = scn.m_antennas

    axes = []
    for ki in range(k):
        axes.extend([p_axes[ki], tau_axes[ki]])
    g_size = int(np.prod([len(a) for a in axes]))

    # budget check before any G-sized array is materialized
    if patterns is None:
        sets = _subsets(u, scn.mode)
        n_cand = _count_candidates(scn, g_size, len(sets))
        if n_cand > grid.max_candidates:
            raise GridBudgetError("enumeration needs %.3g candidates, budget is %.3g"
                                  % (n_cand, grid.max_candidates))
        slot_sets = [sets] * (k * s)
        pattern_iter = _pattern_arrays(slot_sets, k, u, s)
    else:
        pattern_iter = iter(patterns)

    mesh = np.meshgrid(*axes, indexing="ij")
    p_grid = np.stack([mesh[2 * ki].ravel() for ki in range(k)], axis=1)    # (G,K)
    tau_grid = np.stack([mesh[2 * ki + 1].ravel() for ki in range(k)], axis=1)
    if cap_choices is None:
        cap_choices = _cap_ranges(scn)

    wit = t - tau_grid                                   # (G,K), > 0 by axis bound
    zeta = tau_grid / wit
    wpt = scn.wpt_gain()                                 # (K,U,S)
    a2 = scn.alpha ** 2                                  # (K,U)
    # device transmit power; independent of scheduling
    p_dev = zeta[:, :, None, None] * wpt[None] * p_grid[:, :, None, None]   # (G,K,U,S)
    c3_ok = np.all(p_dev <= scn.p_user_max + 1e-12, axis=(1, 2, 3))         # (G,)
    q_all = p_dev * a2[None, :, :, None] * scn.sinr_gain[None]
    i_est = p_dev * a2[None, :, :, None] * scn.sigma_e2

    best = OracleResult(feasible=False, objective=objective, eta=eta,
                        reason="no candidate satisfied the constraints")
    n_seen = 0

    for cmask in pattern_iter:
        cq = cmask[None] * q_all
        per_cell = cq.sum(axis=2)                        # (G,K,S)
        inter = per_cell.sum(axis=1, keepdims=True) - per_cell
        if scn.mode == "oma":
            intra = 0.0
        else:
            intra = np.zeros_like(q_all)
            for ki in range(k):
                for si in range(s):
                    idx = scn.decode_order[ki, si]
                    sortd = cq[:, ki, idx, si]
                    suffix = np.flip(np.cumsum(np.flip(sortd, 1), 1), 1)
                    intra[:, ki, idx, si] = suffix - sortd
        denom = intra + inter[:, :, None, :] + i_est + scn.noise_w
        sinr = q_all / denom                             # (G,K,U,S)

        occ = cmask.max(axis=1).sum(axis=1)              # (K,) occupied subcarriers
        cell_busy = cmask.any(axis=(1, 2))               # (K,)

        r_cell, e_cell, feas_cell = [], [], []
        for ki in range(k):
            caps = cap_choices[ki].astype(float)         # (Nc,)
            arr_fac = (1.0 + np.log(m[ki] / caps)) * caps
            x = sinr[:, ki, :, :, None] * arr_fac        # (G,U,S,Nc)
            rk = scn.bs_hz * np.log1p(x) / np.log(2.0)
            act = cmask[ki] > 0                          # (U,S)
            if act.any():
                ra = rk[:, act, :]                       # (G,A,Nc)
                feas = np.all(ra >= scn.rmin_bits - 1e-12, axis=1)
                r_tot_k = wit[:, ki, None] * ra.sum(axis=1)
            else:
                feas = np.ones((g_size, caps.size), dtype=bool)
                r_tot_k = np.zeros((g_size, caps.size))
            chains = scn.bs_chain_w * caps * float(cell_busy[ki]) \
                + scn.u_devices * scn.user_chain_w
            ek = chains * t + (p_grid[:, ki] * tau_grid[:, ki] * occ[ki])[:, None]
            r_cell.append(r_tot_k)
            e_cell.append(ek)
            feas_cell.append(feas)

        # combine per-cell tables across antenna caps by broadcasting
        shape = [g_size] + [cap_choices[ki].size for ki in range(k)]
        r_tot = np.zeros(shape)
        e_tot = np.zeros(shape)
        feas = c3_ok.reshape([g_size] + [1] * k)
        feas = np.broadcast_to(feas, shape).copy()
        for ki in range(k):
            bshape = [1] * (k + 1)
            bshape[0] = g_size
            bshape[ki + 1] = cap_choices[ki].size
            r_tot = r_tot + r_cell[ki].reshape(bshape)
            e_tot = e_tot + e_cell[ki].reshape(bshape)
            feas &= feas_cell[ki].reshape(bshape)

        n_seen += feas.size
        if not feas.any():
            continue
        score = r_tot / e_tot if objective == "ee" else r_tot - eta * e_tot
        score = np.where(feas, score, -np.inf)
        flat = int(np.argmax(score))
        if score.ravel()[flat] > best.score:
            idx = np.unravel_index(flat, shape)
            gi = idx[0]
            caps = np.array([cap_choices[ki][idx[ki + 1]] for ki in range(k)], dtype=float)
            alloc = Allocation(
                p=p_grid[gi].copy(), tau=tau_grid[gi].copy(),
                n=np.repeat(caps, u * s).reshape(k, u, s),
                c=cmask.astype(float).copy(),
            )
            best = OracleResult(
                feasible=True, alloc=alloc,
                r_tot=float(r_tot[idx]), e_tot=float(e_tot[idx]),
                ee=float(r_tot[idx] / e_tot[idx]), score=float(score[idx]),
                eta=eta, objective=objective)
    best.n_candidates = n_seen
    return best


def _pattern_arrays(slot_sets, k, u, s):
    for combo in itertools.product(*slot_sets):
        cmask = np.zeros((k, u, s))
        slot = 0
        for ki in range(k):
            for si in range(s):
                cmask[ki, combo[slot], si] = 1.0
                slot += 1
        yield cmask


def numerical_hessian(f, x, h):
    """Symmetric central-difference Hessian of a scalar function.

    h is the per-coordinate step (scalar or array); a zero step is a domain
    error. The matrix is symmetrized by averaging the two mixed estimates.
    """
    x = np.asarray(x, dtype=float)
    h = np.broadcast_to(np.asarray(h, dtype=float), x.shape).copy()
    if np.any(h == 0):
        raise ValueError("finite-difference step must be nonzero in every coordinate")
    n = x.size
    hess = np.empty((n, n))
    f0 = f(x)
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = h[i]
        hess[i, i] = (f(x + ei) - 2.0 * f0 + f(x - ei)) / h[i] ** 2
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = h[j]
            hess[i, j] = (f(x + ei + ej) - f(x + ei - ej)
                          - f(x - ei + ej) + f(x - ei - ej)) / (4.0 * h[i] * h[j])
            hess[j, i] = hess[i, j]
    return 0.5 * (hess + hess.T)


def hessian_step(x, rel=1e-4, floor=1e-8):
    """Step sizes scaled to each variable's magnitude."""
    x = np.asarray(x, dtype=float)
    return rel * np.maximum(np.abs(x), floor / rel)


@dataclass
class DistributionCheck:
    mean_emp: float
    mean_analytic: float
    var_emp: float = np.nan
    var_analytic: float = np.nan

    @property
    def mean_rel_err(self):
        return abs(self.mean_emp - self.mean_analytic) / abs(self.mean_analytic)

    @property
    def var_rel_err(self):
        return abs(self.var_emp - self.var_analytic) / abs(self.var_analytic)


def _top_n_sums(m, n, trials, seed, block=4096):
    rng = np.random.default_rng(seed)
    out = np.empty(trials)
    done = 0
    while done < trials:
        b = min(block, trials - done)
        draw = rng.exponential(1.0, size=(b, m))
        part = np.partition(draw, m - n, axis=1)[:, m - n:]
        out[done:done + b] = part.sum(axis=1)
        done += b
    return out


def trimmed_sum_distribution_check(m, n, trials=100000, seed=0):
    """Empirical sum of the n largest of m unit-exponential antenna gains
    against the asymptotic N(n(1+ln(m/n)), n(2-n/m)) law."""
    if not 1 <= n <= m:
        raise ValueError("need 1 <= n <= m")
    sums = _top_n_sums(m, n, trials, seed)
    return DistributionCheck(
        mean_emp=float(sums.mean()),
        mean_analytic=n * (1.0 + np.log(m / n)),
        var_emp=float(sums.var(ddof=1)),
        var_analytic=n * (2.0 - n / m),
    )


def rate_distribution_check(m, n, gamma, trials=100000, seed=0):
    """Monte-Carlo mean of log2(1 + gamma * trimmed sum) against the
    closed-form location log2(1 + (1+ln(m/n)) * gamma * n)."""
    sums = _top_n_sums(m, n, trials, seed)
    return DistributionCheck(
        mean_emp=float(np.mean(np.log2(1.0 + gamma * sums))),
        mean_analytic=float(np.log2(1.0 + (1.0 + np.log(m / n)) * gamma * n)),
    )
