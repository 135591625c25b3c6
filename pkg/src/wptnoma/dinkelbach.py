"""Fractional-programming outer loop for the energy-efficiency ratio.

The EE maximization R/E is solved through the parametric subtractive problem
max R - eta*E: starting from eta = 0, each iteration maximizes the subtractive
objective with the inner solver (consensus ADMM, or the brute-force oracle on
tiny instances), then updates eta to the achieved R/E until |R - eta*E| falls
under the effective tolerance. Antenna counts stay continuous through the
loop and are floored only after convergence, then the subcarrier indicators
are binarized and feasibility is restored.
"""

from dataclasses import dataclass, field

import numpy as np

from . import admm as admm_mod
from . import metrics, oracle
from .admm import round_antennas, tau_upper


class DinkelbachError(RuntimeError):
    pass


def subtractive_objective(alloc, eta, scn):
    """R_tot(alloc) - eta * E_tot(alloc), in bits."""
    return metrics.total_throughput(scn, alloc) - eta * metrics.total_energy(scn, alloc)


def admm_inner(params=None, rho=None, epsilon=None, max_iters=None):
    """Inner solver running ADMM, warm-started from the previous outer
    iteration's state. Exposes .tolerance and collects .runs."""
    holder = {"state": None}
    runs = []

    def inner(scn, eta):
        p = params if params is not None else scn.cfg.solver
        alloc, run = admm_mod.admm_solve(scn, eta, rho=rho, epsilon=epsilon,
                                         max_iters=max_iters, init=holder["state"],
                                         params=p)
        holder["state"] = run.state
        runs.append(run)
        inner.tolerance = p.inner_tol
        return alloc

    inner.tolerance = (params.inner_tol if params is not None else 1e-6)
    inner.runs = runs
    return inner


def oracle_inner(grid=None):
    """Inner solver running the exhaustive grid oracle; exact per grid point,
    so Dinkelbach terminates finitely at a grid fixed point."""

    def inner(scn, eta):
        res = oracle.brute_force_optimum(scn, grid=grid, objective="subtractive",
                                         eta=eta)
        if not res.feasible:
            raise DinkelbachError("oracle inner solver: %s" % res.reason)
        return res.alloc

    inner.tolerance = 0.0
    inner.runs = []
    return inner


@dataclass
class DinkelbachResult:
    eta: float
    alloc: object              # rounded, feasibility-restored
    relaxed_alloc: object
    report: object             # EEReport of the rounded allocation
    flags: object              # ConstraintReport of the rounded allocation
    iterations: int
    converged: bool
    rows: list                 # (iteration, eta, f_value)
    eps_effective: float
    inner_runs: list = field(default_factory=list)

    @property
    def ee(self):
        return self.report.ee if self.report is not None else 0.0


def _binarize_c(scn, c):
    if scn.mode != "oma":
        return (c >= 0.5).astype(float)
    out = np.zeros_like(c)
    for k in range(c.shape[0]):
        for s in range(c.shape[2]):
            u = int(np.argmax(c[k, :, s]))
            if c[k, u, s] >= 0.5:
                out[k, u, s] = 1.0
    return out


def _polish_discrete(scn, out):
    """Greedy repair of the rounded point, exact evaluation per candidate.

    Two candidate families, accepted only on strict EE improvement:

    * uniform -2/-1/+1 shifts of one cell's antenna counts, clipped to the
      per-cell box: flooring the relaxed N lands next to, not on, the best
      integer when the chain power trades closely against the array-gain log;
    * deactivating one pair or one whole cell: the relaxed point can keep a
      marginal link alive whose chain and radiated energy cost more than the
      rate it adds.

    Deactivation only lowers interference and energy, so the surviving rates
    cannot drop below the floor; antenna moves recheck it. At most eight
    moves are accepted, each round scanning O(K*U*S) candidates.
    """
    n_lo = admm_mod.antenna_floor(scn)
    best = metrics.energy_efficiency(scn, out).ee
    for _ in range(8):
        cands = []
        for k in range(scn.k_cells):
            if not np.any(out.c[k] > metrics.ACT_TOL):
                continue
            for delta in (-2.0, -1.0, 1.0):
                cand = out.copy()
                cand.n[k] = np.clip(out.n[k] + delta, n_lo[k], scn.m_antennas[k])
                if not np.array_equal(cand.n[k], out.n[k]):
                    cands.append(("n", cand))
            cand = out.copy()
            cand.c[k] = 0.0
            cands.append(("off", cand))
        for k, u, s in zip(*np.nonzero(out.c > metrics.ACT_TOL)):
            cand = out.copy()
            cand.c[k, u, s] = 0.0
            cands.append(("off", cand))

        winner = None
        for kind, cand in cands:
            rep = metrics.energy_efficiency(scn, cand)
            if kind == "n":
                act = cand.c > metrics.ACT_TOL
                if np.any(act & (rep.rate < scn.rmin_bits - 1e-12)):
                    continue
            if rep.ee > best * (1.0 + 1e-12):
                best, winner = rep.ee, cand
        if winner is None:
            break
        out = winner
    return out


def finalize_allocation(scn, alloc):
    """Round the relaxed solution and restore feasibility.

    N is floored (never below 1), c binarized at 0.5 (OMA keeps only the
    strongest indicator per subcarrier), tau clamped so C3 holds at the
    consensus power, pairs whose rate floor fails are deactivated, and a
    greedy discrete polish cleans up rounding and scheduling leftovers.
    Returns (alloc, EEReport, ConstraintReport).
    """
    out = round_antennas(alloc)
    out.c = _binarize_c(scn, out.c)

    wmax = scn.wpt_gain().reshape(scn.k_cells, -1).max(axis=1)
    t = scn.t_block
    tau_hi = tau_upper(scn)
    if scn.tau_fixed is None:
        for k in range(scn.k_cells):
            cap = tau_hi
            if out.p[k] * wmax[k] > 0:
                z = scn.p_user_max / (out.p[k] * wmax[k])
                cap = min(cap, z * t / (1.0 + z))
            out.tau[k] = min(out.tau[k], cap)

    for _ in range(scn.u_devices * scn.s_carriers + 1):
        rates = metrics._per_device(scn, out)[4]
        viol = (out.c > metrics.ACT_TOL) & (rates < scn.rmin_bits - 1e-12)
        if not np.any(viol):
            break
        out.c = np.where(viol, 0.0, out.c)

    out = _polish_discrete(scn, out)

    report = metrics.energy_efficiency(scn, out)
    flags = metrics.check_constraints(scn, out)
    return out, report, flags


def dinkelbach_solve(scn, inner="admm", epsilon=None, max_iters=None,
                     params=None, rho=None, grid=None):
    """Outer fractional loop; returns a DinkelbachResult.

    inner: "admm", "oracle", or a callable (scn, eta) -> alloc carrying an
    optional .tolerance attribute. The stopping tolerance is
    max(epsilon, 10 * inner tolerance) so an inexact inner solver cannot
    stall the loop below its own accuracy.
    """
    if params is None:
        params = scn.cfg.solver
    epsilon = float(params.dinkelbach_epsilon if epsilon is None else epsilon)
    max_iters = int(params.dinkelbach_max_iters if max_iters is None else max_iters)
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")

    if callable(inner):
        solver = inner
    elif inner == "admm":
        solver = admm_inner(params=params, rho=rho)
    elif inner == "oracle":
        solver = oracle_inner(grid=grid)
    else:
        raise ValueError("unknown inner solver %r" % (inner,))
    eps_eff = max(epsilon, 10.0 * float(getattr(solver, "tolerance", 0.0)))

    eta = 0.0
    rows = []
    alloc = None
    converged = False
    for t in range(1, max_iters + 1):
        try:
            alloc = solver(scn, eta)
        except DinkelbachError:
            raise
        except Exception as exc:
            raise DinkelbachError(
                "inner solver failed at outer iteration %d (eta=%r): %s"
                % (t, eta, exc)) from exc
        r_tot = metrics.total_throughput(scn, alloc)
        e_tot = metrics.total_energy(scn, alloc)
        f_val = r_tot - eta * e_tot
        rows.append((t, float(eta), float(f_val)))
        if abs(f_val) <= eps_eff:
            converged = True
            break
        eta = r_tot / e_tot

    if alloc is None:
        return DinkelbachResult(eta=eta, alloc=None, relaxed_alloc=None,
                                report=None, flags=None, iterations=0,
                                converged=False, rows=rows, eps_effective=eps_eff,
                                inner_runs=list(getattr(solver, "runs", [])))

    final, report, flags = finalize_allocation(scn, alloc)
    return DinkelbachResult(eta=float(eta), alloc=final, relaxed_alloc=alloc,
                            report=report, flags=flags, iterations=len(rows),
                            converged=converged, rows=rows, eps_effective=eps_eff,
                            inner_runs=list(getattr(solver, "runs", [])))


def trace_csv(result, path_or_buf):
    close = False
    if isinstance(path_or_buf, (str, bytes)):
        f = open(path_or_buf, "w")
        close = True
    else:
        f = path_or_buf
    try:
        f.write("iteration,eta,f_value\n")
        for t, eta, f_val in result.rows:
            f.write("%d,%s,%s\n" % (t, repr(eta), repr(f_val)))
    finally:
        if close:
            f.close()
