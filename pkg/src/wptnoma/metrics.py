"""Link metrics and system totals: SIC ordering, SINR, rate law, throughput,
consumed energy, energy efficiency, constraint checks, CSV reports.

All rates are log2-based. Relaxed antenna counts and subcarrier indicators are
accepted on the same code path as integer/binary ones.
"""

import io
from dataclasses import dataclass

import numpy as np

# an indicator this small means "not scheduled" for occupancy/antenna maxima
ACT_TOL = 1e-9


def decoding_order(gains):
    """SIC order for one (cell, subcarrier): strongest gain decoded first,
    ties broken by ascending device index."""
    g = np.asarray(gains, dtype=float)
    return np.argsort(-g, kind="stable")


def rate(m_antennas, n, sinr, bs_hz):
    """Achievable rate with n of m antennas selected: the trimmed-sum array
    factor (1 + ln(m/n)) * n scales the per-antenna SINR inside the log."""
    n = np.asarray(n, dtype=float)
    m = np.asarray(m_antennas, dtype=float)
    if np.any(n < 1.0) or np.any(n > m):
        raise ValueError("antenna count must lie in [1, M]")
    return bs_hz * np.log2(1.0 + (1.0 + np.log(m / n)) * sinr * n)


def _per_device(scn, alloc):
    """Core per-(k,u,s) quantities for one allocation.

    Returns (harvested J, tx power W, received power W, sinr, rate bits/s).
    Intra-cell interference follows the decode order; inter-cell interference
    sums every other cell's scheduled received powers on the subcarrier; OMA
    mode forces the intra-cell term to zero.
    """
    k, u, s = scn.k_cells, scn.u_devices, scn.s_carriers
    tau = alloc.tau[:, None, None]
    wit = scn.t_block - tau

    # tau = T puts infs into the per-device powers; they are masked out of the
    # SINR below, so silence the intermediate inf*0 warnings wholesale
    with np.errstate(divide="ignore", invalid="ignore"):
        harvested = scn.wpt_gain() * tau * alloc.p[:, None, None]
        p_dev = np.where(wit > 0, harvested / np.where(wit > 0, wit, 1.0), np.inf)
        # received power at the serving BS and the estimation-noise floor
        q = p_dev * scn.alpha[:, :, None] ** 2 * scn.sinr_gain
        i_est = p_dev * scn.alpha[:, :, None] ** 2 * scn.sigma_e2

        # idle pairs contribute no interference even when their notional
        # power is the tau=T infinity
        cq = np.where(alloc.c > 0, alloc.c * q, 0.0)
        if scn.mode == "oma":
            intra = np.zeros_like(q)
        else:
            intra = np.empty_like(q)
            for ki in range(k):
                for si in range(s):
                    idx = scn.decode_order[ki, si]
                    sortd = cq[ki, idx, si]
                    # interference from everyone decoded after you
                    suffix = np.concatenate([np.cumsum(sortd[::-1])[::-1][1:], [0.0]])
                    intra[ki, idx, si] = suffix

        per_cell = cq.sum(axis=1)                   # (K,S)
        inter = per_cell.sum(axis=0)[None, :] - per_cell
        denom = intra + inter[:, None, :] + i_est + scn.noise_w
        sinr = np.where(np.isfinite(q), q / denom, 0.0)
    sinr = np.nan_to_num(sinr, nan=0.0, posinf=0.0)
    m = scn.m_antennas[:, None, None].astype(float)
    # tolerant path: out-of-box n is flagged by check_constraints, not here
    n_safe = np.clip(alloc.n, 1.0, m)
    r = rate(m, n_safe, sinr, scn.bs_hz)
    r = np.where(np.isfinite(r), r, 0.0)
    return harvested, p_dev, q, sinr, r


def _check_wit_phase(scn, alloc, k):
    # tau = T leaves no transmit phase to put the harvested energy into
    if alloc.tau[k] >= scn.t_block and np.any(alloc.c[k] > ACT_TOL):
        raise ValueError("cell %d charges the whole block but has active "
                         "devices; transmit power is undefined" % k)


def sinr_perfect(scn, alloc, k, u, s):
    """SINR of one device under perfect CSI (scenario must carry true gains)."""
    _check_wit_phase(scn, alloc, k)
    return _per_device(scn, alloc)[3][k, u, s]


def sinr_imperfect(scn, alloc, k, u, s):
    """SINR of one device under imperfect CSI; the denominator carries the
    extra estimation-noise term and all gains are the estimates'."""
    _check_wit_phase(scn, alloc, k)
    return _per_device(scn, alloc)[3][k, u, s]


def occupancy(alloc):
    """Relaxed occupancy of each (cell, subcarrier): max_u c, the OR of the
    indicators at binary points."""
    return alloc.c.max(axis=1)


def active_antenna_max(alloc):
    """Largest antenna count serving any scheduled pair, per cell; idle cells
    consume no antenna chains."""
    active = alloc.c > ACT_TOL
    n_eff = np.where(active, alloc.n, 0.0)
    return n_eff.reshape(alloc.n.shape[0], -1).max(axis=1)


def total_throughput(scn, alloc):
    """Sum of c * (T - tau) * rate over every (k,u,s)."""
    r = _per_device(scn, alloc)[4]
    wit = (scn.t_block - alloc.tau)[:, None, None]
    return float(np.sum(alloc.c * np.clip(wit, 0.0, None) * r))


def total_energy(scn, alloc):
    """Consumed energy: per-cell circuit power (BS chains for the busiest
    scheduled antenna count plus every device's receive chain) over the whole
    block, plus the charging-slot radiated energy once per occupied subcarrier."""
    n_max = active_antenna_max(alloc)
    circuits = (scn.bs_chain_w * n_max + scn.u_devices * scn.user_chain_w) * scn.t_block
    radiated = alloc.p * alloc.tau * occupancy(alloc).sum(axis=1)
    return float(np.sum(circuits + radiated))


@dataclass
class EEReport:
    """Evaluation of one allocation, serializable as CSV (device rows + summary)."""

    r_tot: float
    e_tot: float
    ee: float
    harvested: np.ndarray
    tx_power: np.ndarray
    sinr: np.ndarray
    rate: np.ndarray
    alloc: object
    cfg_hash: str = ""
    seed: int = 0

    def to_csv(self, path_or_buf):
        close = False
        if isinstance(path_or_buf, (str, bytes)):
            f = open(path_or_buf, "w")
            close = True
        else:
            f = path_or_buf
        try:
            f.write("kind,cell,device,subcarrier,c,n,p_bs_w,tau_s,harvested_j,"
                    "tx_power_w,sinr,rate_bits,r_tot_bits,e_tot_j,ee_bits_per_j,"
                    "config_hash,seed\n")
            k, u, s = self.harvested.shape
            for ki in range(k):
                for ui in range(u):
                    for si in range(s):
                        f.write("device,%d,%d,%d,%s,%s,%s,%s,%s,%s,%s,%s,,,,%s,%d\n" % (
                            ki, ui, si,
                            _fmt(self.alloc.c[ki, ui, si]), _fmt(self.alloc.n[ki, ui, si]),
                            _fmt(self.alloc.p[ki]), _fmt(self.alloc.tau[ki]),
                            _fmt(self.harvested[ki, ui, si]), _fmt(self.tx_power[ki, ui, si]),
                            _fmt(self.sinr[ki, ui, si]), _fmt(self.rate[ki, ui, si]),
                            self.cfg_hash, self.seed))
            f.write("summary,,,,,,,,,,,,%s,%s,%s,%s,%d\n" % (
                _fmt(self.r_tot), _fmt(self.e_tot), _fmt(self.ee), self.cfg_hash, self.seed))
        finally:
            if close:
                f.close()

    def csv_text(self):
        buf = io.StringIO()
        self.to_csv(buf)
        return buf.getvalue()


def _fmt(x):
    return repr(float(x))


def energy_efficiency(scn, alloc):
    """Full evaluation -> EEReport. EE = throughput / consumed energy; the
    circuit terms keep the denominator strictly positive."""
    harvested, p_dev, _, sinr, r = _per_device(scn, alloc)
    wit = np.clip((scn.t_block - alloc.tau)[:, None, None], 0.0, None)
    r_tot = float(np.sum(alloc.c * wit * r))
    e_tot = total_energy(scn, alloc)
    if e_tot == 0.0:
        raise ValueError("degenerate scenario: zero consumed energy")
    return EEReport(r_tot=r_tot, e_tot=e_tot, ee=r_tot / e_tot,
                    harvested=harvested, tx_power=p_dev, sinr=sinr, rate=r,
                    alloc=alloc, cfg_hash=scn.cfg_hash, seed=scn.seed)


@dataclass
class ConstraintReport:
    """Per-constraint satisfaction flags; violations are data, not errors."""

    c1_bs_power: bool
    c2_charge_time: bool
    c3_device_power: bool
    c4_rate_floor: bool
    c5_antenna_bounds: bool
    c6_indicator: bool
    detail: dict

    def all_ok(self):
        return (self.c1_bs_power and self.c2_charge_time and self.c3_device_power
                and self.c4_rate_floor and self.c5_antenna_bounds and self.c6_indicator)


def check_constraints(scn, alloc, atol=1e-9):
    _, p_dev, _, _, r = _per_device(scn, alloc)
    active = alloc.c > ACT_TOL

    c1 = bool(np.all(alloc.p >= -atol) and np.all(alloc.p <= scn.p_max + atol))
    c2 = bool(np.all(alloc.tau >= -atol) and np.all(alloc.tau <= scn.t_block + atol))
    c3 = bool(np.all(p_dev >= -atol) and np.all(p_dev <= scn.p_user_max + atol))
    c4 = bool(np.all(r[active] >= scn.rmin_bits - atol)) if active.any() else True
    m = scn.m_antennas[:, None, None]
    c5 = bool(np.all(alloc.n >= 1 - atol) and np.all(alloc.n <= m + atol))
    cap = 1.0 if scn.mode == "oma" else float(scn.u_devices)
    c6 = bool(np.all(alloc.c >= -atol) and np.all(alloc.c <= 1 + atol)
              and np.all(alloc.c.sum(axis=1) <= cap + atol))
    detail = {
        "worst_device_power_w": float(np.max(p_dev)) if p_dev.size else 0.0,
        "worst_active_rate_bits": float(np.min(r[active])) if active.any() else np.inf,
        "active_pairs": int(active.sum()),
    }
    return ConstraintReport(c1, c2, c3, c4, c5, c6, detail)


def oma_mode_metrics(scn, alloc):
    """Evaluation in orthogonal mode: at most one device per (cell, subcarrier),
    no intra-cell interference. A multiply-assigned subcarrier is a mode error."""
    per_sc = (alloc.c > ACT_TOL).sum(axis=1)
    if np.any(per_sc > 1):
        bad = np.argwhere(per_sc > 1)[0]
        raise ValueError("oma mode error: subcarrier %d of cell %d assigned to "
                         "%d devices" % (bad[1], bad[0], per_sc[bad[0], bad[1]]))
    if scn.mode == "oma":
        return energy_efficiency(scn, alloc)
    import copy
    scn_oma = copy.copy(scn)
    scn_oma.mode = "oma"
    return energy_efficiency(scn_oma, alloc)
