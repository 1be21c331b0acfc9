"""Primal log-barrier interior-point solver for exponential-sum programs.

Phase I finds a strictly feasible point by minimizing the largest
constraint value; the main phase follows the central path with
equality-constrained Newton centering steps and a geometric barrier
schedule.  All constraint evaluations route through the guarded kernels,
so overflowing exponents surface as ``+inf`` values that the line search
rejects rather than as floating-point exceptions.
"""

from __future__ import annotations

import sys
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from . import kernels
from ._kernels_py import constraint_values as _raw_values
from .expressions import Status
from .standard_form import ExpSumConstraint, ExpSumProgram, extend_with_slack

_NEWTON_TOL = 1e-13  # squared Newton decrement threshold (half of it, below)
_STEP_FLOOR = 1e-18
# near-flat barrier directions can produce astronomically long Newton steps
# (regularization-scale Hessian); 50 log-units per step keeps iterates where
# the model is meaningful without slowing ordinary solves
_STEP_CAP = 50.0


@dataclass(frozen=True)
class SolverSettings:
    """Barrier-method parameters; defaults suit desk-scale problems."""

    mu: float = 10.0
    tau0: float = 1.0
    gap_tol: float = 1e-8
    feas_tol: float = 1e-8
    alpha: float = 0.25
    beta: float = 0.5
    max_newton: int = 50
    max_outer: int = 100
    unbounded_threshold: float = -1e3
    regularization: float = 1e-10
    verbose: bool = False
    backend: str = "auto"

    def __post_init__(self):
        if not self.mu > 1.0:
            raise ValueError("mu must exceed 1")
        if not (self.gap_tol > 0 and self.feas_tol > 0 and self.tau0 > 0):
            raise ValueError("tolerances and tau0 must be positive")
        if not 0.0 < self.alpha < 0.5:
            raise ValueError("alpha must lie in (0, 0.5)")
        if not 0.0 < self.beta < 1.0:
            raise ValueError("beta must lie in (0, 1)")
        if self.regularization <= 0:
            raise ValueError("regularization must be positive")


@dataclass
class SolverResult:
    """Solver output on the canonical program (log-space quantities)."""

    status: Status
    u: Optional[np.ndarray]
    ineq_duals: np.ndarray
    eq_duals: np.ndarray
    value: float
    iterations: int = 0
    newton_steps: int = 0
    history: list = field(default_factory=list)
    message: str = ""
    kkt: Optional[tuple] = None


@dataclass
class Phase1Result:
    status: str  # "feasible" | "infeasible" | "inconclusive"
    u: Optional[np.ndarray]
    slack: float
    newton_steps: int = 0


# ---------------------------------------------------------------------------
# reference per-constraint evaluation (independent of the packed kernels)


def constraint_value_grad_hess(constraint: ExpSumConstraint, u):
    """Value, gradient, and Hessian of one exponential-sum constraint.

    The value is reported as ``+inf`` when any exponent exceeds the guard;
    the gradient and Hessian are then computed with capped exponents and are
    only meaningful where the value is finite.
    """
    u = np.asarray(u, dtype=float)
    n = u.size
    tail = constraint.tail.dense(n)
    value = constraint.tail.const + float(tail @ u)
    grad = tail
    hess = np.zeros((n, n))
    overflow = False
    for form in constraint.terms:
        z = form.value(u)
        if z > kernels.EXP_GUARD:
            overflow = True
            z = kernels.EXP_GUARD
        e = float(np.exp(z))
        a = form.dense(n)
        value += e
        grad = grad + e * a
        hess += e * np.outer(a, a)
    if overflow:
        value = np.inf
    return value, grad, hess


def kkt_residual(program: ExpSumProgram, u, lam, nu):
    """(stationarity, primal feasibility, complementarity) infinity norms."""
    u = np.asarray(u, dtype=float)
    lam = np.asarray(lam, dtype=float)
    stat = program.c.copy()
    primal = 0.0
    comp = 0.0
    for i, cons in enumerate(program.ineqs):
        value, grad, _ = constraint_value_grad_hess(cons, u)
        stat += lam[i] * grad
        primal = max(primal, value)
        comp = max(comp, abs(lam[i] * value))
    if program.p:
        stat += program.a_eq.T @ np.asarray(nu, dtype=float)
    stationarity = float(np.abs(stat).max()) if stat.size else 0.0
    return stationarity, max(0.0, primal), comp


# ---------------------------------------------------------------------------
# Newton machinery


def _solve_kkt(h_mat, a_eq, rhs, base_reg):
    """Symmetric-factorization KKT solve with regularization fallback."""
    n = h_mat.shape[0]
    p = a_eq.shape[0]
    size = n + p
    kkt = np.zeros((size, size))
    kkt[n:, :n] = a_eq
    kkt[:n, n:] = a_eq.T
    rhs_norm = 1.0 + float(np.abs(rhs).max())
    reg = base_reg
    for _ in range(4):
        kkt[:n, :n] = h_mat + reg * np.eye(n)
        try:
            # conditioning warnings are expected near the central path; the
            # residual check below decides whether the step is usable
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
                sol = scipy.linalg.solve(kkt, rhs, assume_a="sym")
        except (scipy.linalg.LinAlgError, ValueError):
            sol = None
        if sol is not None and np.all(np.isfinite(sol)):
            resid = float(np.abs(kkt @ sol - rhs).max())
            if resid <= 1e-6 * rhs_norm:
                return sol
        reg *= 100.0
    # rank-deficient equality rows land here; minimum-norm step
    kkt[:n, :n] = h_mat + base_reg * np.eye(n)
    sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
    if np.all(np.isfinite(sol)):
        return sol
    return None


def _center(pack, kb, c, a_eq, d_eq, u, tau, settings, stop=None,
            step_cap=_STEP_CAP):
    """Newton centering for ``tau * c@u + barrier`` from a strictly feasible u.

    Returns a dict with the final point, the equality multiplier of the last
    KKT solve, and loop diagnostics.
    """
    n = pack.n
    p = a_eq.shape[0]
    w_eq = np.zeros(p)
    steps = 0
    converged = False
    decrement_sq = np.inf
    note = ""
    prev_decrement = np.inf
    stagnant = 0
    for _ in range(settings.max_newton):
        h, e = kb.constraint_values(pack, u, kernels.EXP_GUARD)
        if not np.all(h < 0.0):
            note = "lost strict feasibility"
            break
        grads = kb.constraint_grads(pack, u, e)
        w1 = -1.0 / h
        w2 = w1 * w1
        grad_phi = tau * c + grads.T @ w1
        hess_phi = kb.scaled_gram(pack, e * w1[pack.term_cons])
        hess_phi += (grads * w2[:, None]).T @ grads

        rhs = np.concatenate([-grad_phi, d_eq - a_eq @ u])
        sol = _solve_kkt(hess_phi, a_eq, rhs, settings.regularization)
        if sol is None:
            note = "singular KKT system"
            break
        step = sol[:n]
        w_eq = sol[n:]
        decrement_sq = max(float(-grad_phi @ step), 0.0)
        if 0.5 * decrement_sq <= _NEWTON_TOL:
            converged = True
            break
        # three consecutive near-stalls of a tiny decrement mean the
        # floating-point floor for this conditioning, not slow progress
        if decrement_sq <= 1e-8 and decrement_sq > 0.9 * prev_decrement:
            stagnant += 1
            if stagnant >= 3:
                converged = True
                break
        else:
            stagnant = 0
        prev_decrement = decrement_sq
        step_len = float(np.abs(step).max())
        if step_len > step_cap:
            step = step * (step_cap / step_len)

        phi0 = tau * float(c @ u) - float(np.log(-h).sum())
        slope = float(grad_phi @ step)
        t = 1.0
        accepted = False
        while t >= _STEP_FLOOR:
            u_try = u + t * step
            h_try, _ = kb.constraint_values(pack, u_try, kernels.EXP_GUARD)
            if np.all(h_try < 0.0):
                phi_try = tau * float(c @ u_try) - float(np.log(-h_try).sum())
                if phi_try <= phi0 + settings.alpha * t * slope:
                    accepted = True
                    break
            t *= settings.beta
        if not accepted:
            note = "line search stalled"
            break
        u = u_try
        steps += 1
        if stop is not None and stop(u):
            return {
                "u": u, "w_eq": w_eq, "steps": steps,
                "converged": False, "stopped": True, "unbounded": False,
                "decrement": decrement_sq, "note": note,
            }
        if float(c @ u) < settings.unbounded_threshold:
            return {
                "u": u, "w_eq": w_eq, "steps": steps,
                "converged": False, "stopped": False, "unbounded": True,
                "decrement": decrement_sq, "note": note,
            }
    return {
        "u": u, "w_eq": w_eq, "steps": steps,
        "converged": converged, "stopped": False, "unbounded": False,
        "decrement": decrement_sq, "note": note,
    }


def _barrier_loop(pack, kb, c, a_eq, d_eq, u, settings, stop=None, log_label="",
                  step_cap=_STEP_CAP):
    tau = settings.tau0
    total_steps = 0
    history = []
    outcome = {"u": u, "w_eq": np.zeros(a_eq.shape[0])}
    status = "gap"
    for outer in range(1, settings.max_outer + 1):
        outcome = _center(
            pack, kb, c, a_eq, d_eq, outcome["u"], tau, settings, stop, step_cap
        )
        total_steps += outcome["steps"]
        gap = pack.m / tau
        history.append(
            {
                "tau": tau,
                "newton_steps": outcome["steps"],
                "gap": gap,
                "objective": float(c @ outcome["u"]),
                "decrement": outcome["decrement"],
            }
        )
        if settings.verbose:
            print(
                f"[llcp]{log_label} tau={tau:.3e} newton={outcome['steps']} "
                f"gap={gap:.3e} decrement={outcome['decrement']:.3e} "
                f"obj={history[-1]['objective']:.9e}",
                file=sys.stderr,
            )
        if outcome["stopped"]:
            status = "stopped"
            break
        if outcome["unbounded"]:
            status = "unbounded"
            break
        if outcome["note"]:
            status = "stalled"
            break
        if gap <= settings.gap_tol:
            status = "gap"
            break
        tau *= settings.mu
    else:
        status = "max_outer"
    return {
        "u": outcome["u"],
        "w_eq": outcome["w_eq"],
        "tau": tau,
        "outer": len(history),
        "steps": total_steps,
        "history": history,
        "status": status,
        "converged": bool(outcome.get("converged")),
        "note": outcome.get("note", ""),
    }


# ---------------------------------------------------------------------------
# initialization


def _balanced_start(pack, a_eq, d_eq):
    """Equality-feasible point that keeps term exponents small.

    Minimizes the sum of squared exponents subject to ``A u = d``; this is a
    linear least-squares problem whose solution centers the exponential
    terms, which keeps phase I away from the overflow guard.
    """
    n = pack.n
    p = a_eq.shape[0]
    if pack.t:
        rows = np.zeros((pack.t, n))
        for k in range(pack.t):
            lo, hi = pack.a_indptr[k], pack.a_indptr[k + 1]
            rows[k, pack.a_idx[lo:hi]] = pack.a_val[lo:hi]
        gram = rows.T @ rows + 1e-8 * np.eye(n)
        lin = -rows.T @ pack.b
    else:
        gram = np.eye(n)
        lin = np.zeros(n)
    if p == 0:
        return np.linalg.solve(gram, lin)
    kkt = np.block([[gram, a_eq.T], [a_eq, np.zeros((p, p))]])
    rhs = np.concatenate([lin, d_eq])
    sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
    return sol[:n]


def phase1(program: ExpSumProgram, settings: Optional[SolverSettings] = None, u0=None):
    """Strictly feasible point for the inequalities, or an infeasibility call.

    Minimizes a shared slack ``s`` over ``h_i(u) <= s`` and ``A u = d`` from
    an analytically feasible start, stopping early once the slack is safely
    negative.  Returns "infeasible" when the certified minimum slack exceeds
    the feasibility tolerance, and "inconclusive" on boundary cases.
    """
    settings = settings or SolverSettings()
    kb = kernels.get_backend(settings.backend)
    n, m = program.n, program.m
    if m == 0:
        u = u0 if u0 is not None else _balanced_start(
            program.packed, program.a_eq, program.d_eq
        )
        return Phase1Result("feasible", u, -np.inf)

    pack = program.packed
    if u0 is None:
        u0 = _balanced_start(pack, program.a_eq, program.d_eq)
    # raw (cap-700) values keep the initial slack finite even when the guard
    # threshold is exceeded at the start
    h0, _ = _raw_values(pack, u0, 700.0)
    if not np.all(np.isfinite(h0)):
        return Phase1Result("inconclusive", None, np.inf)

    ext = extend_with_slack(pack)
    c_ext = np.zeros(n + 1)
    c_ext[n] = 1.0
    a_ext = (
        np.hstack([program.a_eq, np.zeros((program.p, 1))])
        if program.p
        else np.zeros((0, n + 1))
    )
    u_ext = np.concatenate([u0, [float(h0.max()) + 1.0]])

    margin = max(10.0 * settings.feas_tol, 1e-6)

    def stop(point):
        h, _ = kb.constraint_values(pack, point[:n], kernels.EXP_GUARD)
        return bool(np.all(h < -margin))

    # phase I only needs to cross into the feasible region; short steps
    # keep the exit point at a sane scale instead of deep along flat
    # barrier directions
    run = _barrier_loop(
        ext, kb, c_ext, a_ext, program.d_eq, u_ext, settings,
        stop=stop, log_label="[phase1]", step_cap=2.0,
    )
    u = run["u"][:n]
    slack = float(run["u"][n])
    h, _ = kb.constraint_values(pack, u, kernels.EXP_GUARD)
    max_h = float(h.max())
    if max_h < -1e-10:
        return Phase1Result("feasible", u, max_h, run["steps"])
    gap = ext.m / run["tau"]
    if run["converged"] and slack - gap > settings.feas_tol:
        return Phase1Result("infeasible", None, slack, run["steps"])
    return Phase1Result("inconclusive", None, slack, run["steps"])


# ---------------------------------------------------------------------------
# main entry


def _result(status, u, m, p, value, **kw):
    return SolverResult(
        status=status,
        u=u,
        ineq_duals=kw.pop("lam", np.zeros(m)),
        eq_duals=kw.pop("nu", np.zeros(p)),
        value=value,
        **kw,
    )


def solve(program: ExpSumProgram, settings: Optional[SolverSettings] = None):
    """Solve the canonical program; never raises on numeric failure.

    An Optimal status certifies: strict inequality feasibility within the
    feasibility tolerance, equality residual within the same tolerance,
    nonnegative inequality duals, KKT stationarity within 1e-6,
    complementarity within 1e-6, and barrier gap ``m / tau`` within the gap
    tolerance.  Anything the checks cannot certify is reported as
    MaxIterations with diagnostics, unboundedness via the canonical
    objective threshold, and infeasibility via phase I.
    """
    settings = settings or SolverSettings()
    kb = kernels.get_backend(settings.backend)
    n, m, p = program.n, program.m, program.p
    c = program.c
    a_eq, d_eq = program.a_eq, program.d_eq

    if p:
        u_ls, *_ = np.linalg.lstsq(a_eq, d_eq, rcond=None)
        if float(np.abs(a_eq @ u_ls - d_eq).max()) > settings.feas_tol:
            return _result(
                Status.INFEASIBLE, None, m, p, np.inf,
                message="equality system is inconsistent",
            )
    else:
        u_ls = np.zeros(n)

    if m == 0:
        return _solve_equality_only(program, u_ls, settings)

    ph1 = phase1(program, settings)
    if ph1.status == "infeasible":
        return _result(
            Status.INFEASIBLE, None, m, p, np.inf,
            newton_steps=ph1.newton_steps,
            message=f"phase I slack {ph1.slack:.3e} exceeds tolerance",
        )
    if ph1.status == "inconclusive":
        return _result(
            Status.MAX_ITERATIONS, None, m, p, np.nan,
            newton_steps=ph1.newton_steps,
            message=f"phase I inconclusive (slack {ph1.slack:.3e})",
        )
    if not np.any(c):
        # constant objective: every strictly feasible point is optimal and
        # zero multipliers satisfy the KKT system exactly
        kkt = kkt_residual(program, ph1.u, np.zeros(m), np.zeros(p))
        return _result(
            Status.OPTIMAL, ph1.u, m, p, 0.0,
            newton_steps=ph1.newton_steps, kkt=kkt,
        )

    run = _barrier_loop(program.packed, kb, c, a_eq, d_eq, ph1.u, settings)
    u = run["u"]
    value = float(c @ u)
    steps = ph1.newton_steps + run["steps"]

    if run["status"] == "unbounded":
        return _result(
            Status.UNBOUNDED, u, m, p, value,
            iterations=run["outer"], newton_steps=steps, history=run["history"],
            message="canonical objective fell below the unboundedness threshold",
        )

    tau = run["tau"]
    h, e = kb.constraint_values(program.packed, u, kernels.EXP_GUARD)
    lam = 1.0 / (tau * (-h))
    nu = run["w_eq"] / tau if p else np.zeros(0)
    kkt = kkt_residual(program, u, lam, nu)
    if kkt[0] > 1e-6:
        # the barrier-formula duals hit the float64 centering floor at large
        # tau; polish them with a least-squares fit of the stationarity system
        lam, nu, kkt = _refine_duals(program, kb, u, e, h, lam, nu, kkt)
    eq_resid = float(np.abs(a_eq @ u - d_eq).max()) if p else 0.0
    gap = m / tau

    failures = []
    if run["status"] in ("stalled", "max_outer"):
        failures.append(run["status"] if not run["note"] else run["note"])
    if gap > settings.gap_tol:
        failures.append(f"gap {gap:.2e}")
    if kkt[0] > 1e-6:
        failures.append(f"stationarity {kkt[0]:.2e}")
    if kkt[1] > settings.feas_tol:
        failures.append(f"primal residual {kkt[1]:.2e}")
    if kkt[2] > 1e-6:
        failures.append(f"complementarity {kkt[2]:.2e}")
    if eq_resid > settings.feas_tol:
        failures.append(f"equality residual {eq_resid:.2e}")
    if np.any(lam < 0):
        failures.append("negative inequality dual")

    status = Status.OPTIMAL if not failures else Status.MAX_ITERATIONS
    return _result(
        status, u, m, p, value,
        lam=lam, nu=nu,
        iterations=run["outer"], newton_steps=steps, history=run["history"],
        message="; ".join(failures), kkt=kkt,
    )


def _refine_duals(program, kb, u, e, h, lam0, nu0, kkt0):
    """Polished dual estimates at the final iterate.

    Two candidates against the barrier-formula pair: a clipped least-squares
    fit of ``c + G^T lam + A^T nu ~ 0`` over all constraints, and a
    nonnegative fit supported on the nearly active constraints only (which
    keeps complementarity small).  The best certifying pair wins.
    """
    import scipy.optimize

    grads = kb.constraint_grads(program.packed, u, e)
    m, p = program.m, program.p

    def refit_nu(lam):
        if not p:
            return np.zeros(0)
        nu, *_ = np.linalg.lstsq(
            program.a_eq.T, -(program.c + grads.T @ lam), rcond=None
        )
        return nu

    candidates = [(lam0, nu0, kkt0)]

    stack = np.hstack([grads.T, program.a_eq.T]) if p else grads.T
    sol, *_ = np.linalg.lstsq(stack, -program.c, rcond=None)
    lam = np.maximum(sol[:m], 0.0)
    nu = refit_nu(lam)
    candidates.append((lam, nu, kkt_residual(program, u, lam, nu)))

    active = np.where(h >= -1e-4)[0]
    if active.size:
        nu = nu0
        lam = np.zeros(m)
        for _ in range(2):  # alternate the sign-free and nonnegative parts
            rhs = -(program.c + (program.a_eq.T @ nu if p else 0.0))
            lam_act, _ = scipy.optimize.nnls(grads[active].T, rhs)
            lam = np.zeros(m)
            lam[active] = lam_act
            nu = refit_nu(lam)
            if not p:
                break
        candidates.append((lam, nu, kkt_residual(program, u, lam, nu)))

    valid = [c for c in candidates if c[2][2] <= 1e-6 and np.all(c[0] >= 0.0)]
    if valid:
        return min(valid, key=lambda c: c[2][0])
    return lam0, nu0, kkt0


def _solve_equality_only(program, u_ls, settings):
    """No inequalities: the problem is linear over an affine set."""
    c, a_eq = program.c, program.a_eq
    n, p = program.n, program.p
    c_norm = float(np.abs(c).max()) if c.size else 0.0
    if p == 0:
        if c_norm == 0.0:
            return _result(
                Status.OPTIMAL, np.zeros(n), 0, 0, 0.0, kkt=(0.0, 0.0, 0.0)
            )
        return _result(
            Status.UNBOUNDED, None, 0, 0, -np.inf,
            message="free linear objective",
        )
    nu, *_ = np.linalg.lstsq(a_eq.T, -c, rcond=None)
    resid = float(np.abs(c + a_eq.T @ nu).max())
    if resid <= 1e-9 * max(1.0, c_norm):
        value = float(c @ u_ls)
        return _result(
            Status.OPTIMAL, u_ls, 0, p, value, nu=nu,
            kkt=(resid, 0.0, 0.0),
        )
    return _result(
        Status.UNBOUNDED, None, 0, p, -np.inf,
        message="objective unbounded on the equality set",
    )
