"""End-to-end acceptance checks for the whole toolkit.

Each test covers one numbered acceptance item and prints a single
"acceptance N: PASS/FAIL" line (run pytest with -s to see the lines for
passing tests). Budgets are asserted alongside the numerical tolerances, so
a regression in runtime fails the same way a regression in accuracy does.
"""

import os
import time

import numpy as np

from wptnoma import kernels, metrics
from wptnoma.admm import admm_solve, tau_upper
from wptnoma.cli import run_scenario, run_sweep
from wptnoma.config import NetworkConfig
from wptnoma.dinkelbach import dinkelbach_solve
from wptnoma.oracle import (GridSpec, brute_force_optimum, hessian_step,
                            numerical_hessian, trimmed_sum_distribution_check)
from wptnoma.scenario import Allocation, build_scenario, uniform_allocation

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
CONFIGS = os.path.join(ROOT, "configs")


def _verdict(num, ok, detail):
    print("acceptance %s: %s - %s" % (num, "PASS" if ok else "FAIL", detail))
    assert ok, "acceptance %s failed: %s" % (num, detail)


def _small(**over):
    base = dict(cells=1, devices=2, subcarriers=1, antennas=8,
                bandwidth_hz=1e6, noise_w=1e-6, device_distance_m=35.0)
    base.update(over)
    return NetworkConfig(**base).validate()


# 1. The outer loop driven by the exact grid oracle must land on the
#    fractional root, and the root must equal the best EE on the same grid.

def test_dinkelbach_root_on_tiny_instance():
    t0 = time.time()
    scn = build_scenario(_small(rng_seed=11))
    grid = GridSpec(p_points=40, tau_points=48, refine_rounds=0)
    res = dinkelbach_solve(scn, inner="oracle", grid=grid)
    direct = brute_force_optimum(scn, grid=grid, objective="ee")
    elapsed = time.time() - t0

    f_final = abs(res.rows[-1][2])
    rel = abs(res.eta - direct.ee) / direct.ee
    ok = (res.converged and res.iterations <= 50 and f_final <= 1e-7
          and rel <= 0.01 and elapsed < 60)
    _verdict(1, ok, "|F|=%.2e iters=%d eta_vs_grid=%.2e (%.1fs)"
             % (f_final, res.iterations, rel, elapsed))


# 2. Relaxed ADMM plus rounding must track the exhaustive oracle across a
#    mixed bag of seeded tiny instances.

def test_admm_tracks_oracle_on_tiny_instances():
    t0 = time.time()
    grid = GridSpec(p_points=40, tau_points=48, refine_rounds=2)
    mix = []
    for seed in range(8):
        mix.append(_small(rng_seed=seed))
    for seed in range(10, 16):
        mix.append(_small(subcarriers=2, device_distance_m=45.0, rng_seed=seed))
    for seed in range(20, 25):
        mix.append(_small(cells=2, antennas=4, device_distance_m=40.0,
                          bs_power_fixed_w=3.0, rng_seed=seed))
    for seed in range(30, 35):
        mix.append(_small(cells=2, devices=1, subcarriers=2, antennas=6,
                          device_distance_m=50.0, bs_power_fixed_w=2.0,
                          rng_seed=seed))

    gaps = []
    for cfg in mix:
        scn = build_scenario(cfg)
        res = dinkelbach_solve(scn, inner="admm")
        ora = brute_force_optimum(scn, grid=grid, objective="ee")
        gaps.append((ora.ee - res.ee) / ora.ee)
    elapsed = time.time() - t0

    worst = max(gaps)
    ok = len(gaps) >= 20 and worst <= 0.02 and elapsed < 300
    _verdict(2, ok, "%d instances, worst gap %.2f%% (%.1fs)"
             % (len(gaps), worst * 100, elapsed))


# 3. Consensus speed on a full-size network: the residual criterion within
#    20 iterations at rho=0.088, and a smaller rho strictly slower. The
#    charging slot is pinned and selection disabled so the iteration count
#    reflects the power consensus, not drift of the local ascent.

def test_admm_iteration_budget_and_rho_ordering():
    cfg = NetworkConfig(cells=6, devices=15, subcarriers=20, antennas=64,
                        bandwidth_hz=1.0, noise_w=1e-6, rmin_bits_hz=0.0,
                        tau_fixed_s=0.25, antenna_selection=False,
                        rng_seed=0).validate()
    scn = build_scenario(cfg)
    _, fast = admm_solve(scn, eta=0.8, rho=0.088)
    _, slow = admm_solve(scn, eta=0.8, rho=0.068)
    ok = (fast.converged and fast.iterations <= 20
          and slow.iterations > fast.iterations)
    _verdict(3, ok, "rho=0.088: %d iters, rho=0.068: %d iters"
             % (fast.iterations, slow.iterations))


# 4. Curvature: the throughput surface is concave over the continuous
#    (P, tau, N) variables, and the per-cell consensus objective is concave
#    in each block the local ascent optimizes. Interior points only; the
#    antenna draw keeps a margin around the n_max kink in the chain term.

def test_rate_and_local_objective_concavity():
    tol = 1e-6
    npts = 100

    scn1 = build_scenario(NetworkConfig(
        cells=1, devices=2, subcarriers=2, antennas=16, bandwidth_hz=1.0,
        noise_w=1e-6, device_distance_m=50.0, rng_seed=3).validate())
    us = scn1.u_devices * scn1.s_carriers
    wmax1 = scn1.wpt_gain().max()

    def r_tot_of(x):
        alloc = Allocation(
            p=np.array([x[0]]), tau=np.array([x[1]]),
            n=x[2:].reshape(1, scn1.u_devices, scn1.s_carriers).copy(),
            c=np.ones((1, scn1.u_devices, scn1.s_carriers)))
        return metrics.total_throughput(scn1, alloc)

    rng = np.random.default_rng(7)
    worst_r = -np.inf
    pts = 0
    while pts < npts:
        p = rng.uniform(0.05, 0.95) * scn1.p_max
        tau = rng.uniform(0.05, 0.8) * tau_upper(scn1)
        if p * tau / (scn1.t_block - tau) * wmax1 > scn1.p_user_max:
            continue
        n = rng.uniform(2.0, scn1.m_antennas[0] - 1.0, size=us)
        x = np.concatenate([[p, tau], n])
        h = numerical_hessian(r_tot_of, x, hessian_step(x))
        worst_r = max(worst_r, float(np.max(np.linalg.eigvalsh(h))))
        pts += 1

    scn2 = build_scenario(NetworkConfig(
        cells=2, devices=2, subcarriers=2, antennas=16, bandwidth_hz=1.0,
        noise_w=1e-6, device_distance_m=50.0, rng_seed=5).validate())
    prob = kernels.build_cell_problems(scn2)[0]
    snap = uniform_allocation(scn2, p=scn2.p_max / 3, tau=0.3)
    i_ext = kernels.external_interference(scn2, snap.p, snap.tau, snap.c)[0]
    c_fix = np.ones((scn2.u_devices, scn2.s_carriers))
    wmax2 = prob.w.max()

    def local_obj(p, tau, n, lam, p_glob):
        obj, *_ = kernels.cell_obj_grad(
            p=float(p), tau=float(tau),
            n=n.reshape(scn2.u_devices, scn2.s_carriers), c=c_fix,
            w=prob.w, ve=prob.ve, i_ext=i_ext, order=prob.order,
            m_ant=prob.m_ant, t_block=scn2.t_block, bs_hz=scn2.bs_hz,
            eta_ee=0.8, bs_chain_w=scn2.bs_chain_w,
            user_term_w=scn2.u_devices * scn2.user_chain_w, lam=lam,
            rho=0.088, p_glob=p_glob, oma=prob.oma, act_tol=1e-3,
            want_grad=False)
        return obj

    rng = np.random.default_rng(11)
    worst_l = -np.inf
    pts = 0
    while pts < npts:
        p = rng.uniform(0.05, 0.95) * scn2.p_max
        tau = rng.uniform(0.05, 0.8) * tau_upper(scn2)
        if p * tau / (scn2.t_block - tau) * wmax2 > scn2.p_user_max:
            continue
        n = rng.uniform(2.0, scn2.m_antennas[0] - 1.0, size=us)
        if np.min(np.diff(np.sort(n))) < 0.05:
            continue
        lam = rng.uniform(-0.1, 0.1)
        p_glob = rng.uniform(0.1, 0.9) * scn2.p_max
        for block in ("p", "tau", "n"):
            if block == "p":
                f = lambda y: local_obj(y[0], tau, n, lam, p_glob)
                x = np.array([p])
            elif block == "tau":
                f = lambda y: local_obj(p, y[0], n, lam, p_glob)
                x = np.array([tau])
            else:
                f = lambda y: local_obj(p, tau, y, lam, p_glob)
                x = n
            h = numerical_hessian(f, x, hessian_step(x))
            worst_l = max(worst_l, float(np.max(np.linalg.eigvalsh(h))))
        pts += 1

    ok = worst_r <= tol and worst_l <= tol
    _verdict(4, ok, "R_tot max eig %.2e, local objective max eig %.2e "
             "(%d points each)" % (worst_r, worst_l, npts))


# 5. The trimmed-sum law behind the rate model: empirical moments against
#    the analytic normal location/scale, and the asymptotics tightening as
#    the array grows (N scaled with M to keep the selection ratio fixed).

def test_trimmed_sum_distribution():
    chk = trimmed_sum_distribution_check(256, 64, trials=100000, seed=0)
    var_rel = abs(chk.var_emp - chk.var_analytic) / chk.var_analytic
    gaps = [trimmed_sum_distribution_check(m, m // 4, trials=100000,
                                           seed=0).mean_rel_err
            for m in (64, 256, 1024)]
    ok = (chk.mean_rel_err <= 0.05 and var_rel <= 0.15
          and gaps[0] > gaps[1] > gaps[2])
    _verdict(5, ok, "mean %.3f%%, var %.3f%%, gap %0.4f > %0.4f > %0.4f"
             % (chk.mean_rel_err * 100, var_rel * 100, *gaps))


# 6. Figure-shape sweeps, 100 reps per point. Every row must come back ok,
#    and the seed-averaged EE curves must show the expected shapes.

def _means(rows, **key):
    sel = [float(r["ee"]) for r in rows
           if r["status"] == "ok" and all(r[k] == v for k, v in key.items())]
    assert sel, "no rows for %r" % (key,)
    return float(np.mean(sel))


def _interior_peak(ys):
    i = int(np.argmax(ys))
    if not 0 < i < len(ys) - 1:
        return False, i
    rising = all(ys[j] < ys[j + 1] for j in range(i))
    falling = all(ys[j] > ys[j + 1] for j in range(i, len(ys) - 1))
    return rising and falling, i


def test_sweep_figure_shapes():
    t0 = time.time()
    rows = {}
    for name in ("distance", "csi", "antennas", "power", "mode"):
        rows[name] = run_sweep(os.path.join(CONFIGS, "sweep_%s.toml" % name))
        bad = [r for r in rows[name] if r["status"] != "ok"]
        assert not bad, "sweep %s: %d failed points (%s)" % (
            name, len(bad), bad[0]["status"])

    dist_vals = [25.0, 50.0, 100.0, 200.0]
    dist = [_means(rows["distance"], value=v) for v in dist_vals]
    a_ok = all(dist[i] > dist[i + 1] for i in range(len(dist) - 1))

    b_ok = True
    for v in (35.0, 50.0):
        perfect = _means(rows["csi"], value=v, csi="perfect")
        gaps = [perfect - _means(rows["csi"], value=v, csi="imperfect",
                                 sigma_e2=s) for s in (0.1, 0.3, 0.6)]
        b_ok = b_ok and all(g > 0 for g in gaps)
        b_ok = b_ok and gaps[0] < gaps[1] < gaps[2]

    ant = [_means(rows["antennas"], value=v) for v in (4, 8, 16, 32, 64, 128)]
    c_ok, c_peak = _interior_peak(ant)

    pw_vals = [0.25, 1.0, 4.0, 16.0]
    pw = [_means(rows["power"], value=v) for v in pw_vals]
    d_ok, d_peak = _interior_peak(pw)

    e_ok = all(_means(rows["mode"], value=v, mode="noma")
               >= _means(rows["mode"], value=v, mode="oma")
               for v in (50.0, 100.0))

    elapsed = time.time() - t0
    ok = a_ok and b_ok and c_ok and d_ok and e_ok and elapsed < 1800
    _verdict(6, ok, "distance:%s csi_gap:%s antennas:%s(peak@M=%d) "
             "power:%s(peak@%gW) noma_vs_oma:%s (%.0fs)"
             % (a_ok, b_ok, c_ok, (4, 8, 16, 32, 64, 128)[c_peak],
                d_ok, pw_vals[d_peak], e_ok, elapsed))


# 7. Same seed, same bytes: the full pipeline and the sweep driver both
#    rewrite identical CSVs on a rerun.

def test_deterministic_csv_output(tmp_path):
    outs = []
    for sub in ("a", "b"):
        d = tmp_path / sub
        run_scenario(os.path.join(CONFIGS, "tiny.toml"), out_dir=str(d))
        run_sweep(os.path.join(CONFIGS, "sweep_distance.toml"),
                  out_dir=str(d), reps=2)
        outs.append(d)

    names = ["report.csv", "dinkelbach_trace.csv", "admm_trace.csv",
             "sweep.csv"]
    same = {n: (outs[0] / n).read_bytes() == (outs[1] / n).read_bytes()
            for n in names}
    _verdict(7, all(same.values()),
             " ".join("%s:%s" % kv for kv in sorted(same.items())))
