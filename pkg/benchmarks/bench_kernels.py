"""Timing harness for the per-cell objective/gradient kernel.

Runs the compiled extension against the pure-numpy fallback on the same
inputs: first the raw kernel on one cell of a full-size network, then an
end-to-end ADMM solve with the backend swapped in place. Prints a small
table with per-call timings and the speedup.

Usage: python3 benchmarks/bench_kernels.py [--reps N] [--cells K]
       [--devices U] [--subcarriers S] [--antennas M] [--skip-e2e]
"""

import argparse
import time

import numpy as np

from wptnoma import _kernels_py, admm, kernels
from wptnoma.config import NetworkConfig
from wptnoma.scenario import build_scenario, uniform_allocation

try:
    from wptnoma import _core
except ImportError:
    _core = None


def build_inputs(args):
    cfg = NetworkConfig(cells=args.cells, devices=args.devices,
                        subcarriers=args.subcarriers, antennas=args.antennas,
                        noise_w=1e-6, rng_seed=3).validate()
    scn = build_scenario(cfg)
    alloc = uniform_allocation(scn, p=scn.p_max / 3, tau=0.3, n=args.antennas / 2.0)
    prob = kernels.build_cell_problems(scn)[0]
    i_ext = kernels.external_interference(scn, alloc.p, alloc.tau, alloc.c)[0]
    call = dict(p=float(alloc.p[0]), tau=0.3, n=alloc.n[0], c=alloc.c[0],
                w=prob.w, ve=prob.ve, i_ext=i_ext, order=prob.order,
                m_ant=prob.m_ant, t_block=scn.t_block, bs_hz=scn.bs_hz,
                eta_ee=0.5, bs_chain_w=scn.bs_chain_w,
                user_term_w=scn.u_devices * scn.user_chain_w,
                lam=0.01, rho=0.088, p_glob=float(alloc.p[0]) * 0.9,
                oma=prob.oma, act_tol=1e-3)
    return scn, call


def time_kernel(impl, call, reps):
    fn = impl.cell_obj_grad
    fn(**call)  # warm up
    t0 = time.perf_counter()
    for _ in range(reps):
        fn(**call)
    return (time.perf_counter() - t0) / reps


def check_agreement(call):
    a = _kernels_py.cell_obj_grad(**call)
    b = _core.cell_obj_grad(**call)
    worst = 0.0
    for x, y in zip(a, b):
        if x is None:
            continue
        xa, ya = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        scale = np.maximum(np.abs(xa), 1e-30)
        worst = max(worst, float(np.max(np.abs(xa - ya) / scale)))
    return worst


def time_solve(impl, scn, reps):
    saved = kernels.cell_obj_grad
    kernels.cell_obj_grad = impl.cell_obj_grad
    try:
        t0 = time.perf_counter()
        for _ in range(reps):
            admm.admm_solve(scn, eta=0.5)
        return (time.perf_counter() - t0) / reps
    finally:
        kernels.cell_obj_grad = saved


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=2000, help="raw kernel calls to time")
    ap.add_argument("--cells", type=int, default=6)
    ap.add_argument("--devices", type=int, default=15)
    ap.add_argument("--subcarriers", type=int, default=20)
    ap.add_argument("--antennas", type=int, default=64)
    ap.add_argument("--skip-e2e", action="store_true",
                    help="time only the raw kernel, not full ADMM solves")
    args = ap.parse_args()

    scn, call = build_inputs(args)
    shape = "K=%d U=%d S=%d M=%d" % (args.cells, args.devices,
                                     args.subcarriers, args.antennas)
    print("kernel benchmark  (%s, %d reps)" % (shape, args.reps))

    t_py = time_kernel(_kernels_py, call, args.reps)
    print("  python   %10.1f us/call  %8.0f calls/s" % (t_py * 1e6, 1 / t_py))
    if _core is None:
        print("  compiled backend not built; install with the extension to compare")
        return
    t_c = time_kernel(_core, call, args.reps)
    print("  compiled %10.1f us/call  %8.0f calls/s  (%.1fx)"
          % (t_c * 1e6, 1 / t_c, t_py / t_c))
    print("  max rel disagreement: %.2e" % check_agreement(call))

    if args.skip_e2e:
        return
    e2e_reps = 3
    s_py = time_solve(_kernels_py, scn, e2e_reps)
    s_c = time_solve(_core, scn, e2e_reps)
    print("admm_solve end to end (%d reps)" % e2e_reps)
    print("  python   %10.1f ms/solve" % (s_py * 1e3))
    print("  compiled %10.1f ms/solve  (%.1fx)" % (s_c * 1e3, s_py / s_c))


if __name__ == "__main__":
    main()
