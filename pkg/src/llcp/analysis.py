"""Curvature analysis of expression trees and whole-problem verification.

The analyzer applies the composition rule recursively: an atom application
is certified log-log convex when the atom itself is log-log convex (or
affine) and every argument is log-log affine, log-log convex in a
nondecreasing slot, or log-log concave in a nonincreasing slot; the
symmetric rule certifies log-log concavity.  The returned curvature is a
sound over-approximation -- UNKNOWN means the grammar cannot certify, never
that the expression is misclassified.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .atoms import Curvature, Monotonicity, atom_info, curvature_under
from .errors import ProblemError
from .expressions import (
    AtomApplication,
    Constant,
    Expression,
    Problem,
    Sense,
    Variable,
    evaluate,
)

_ND = Monotonicity.NONDECREASING
_NI = Monotonicity.NONINCREASING


@dataclass
class CurvatureJudgment:
    """Curvature inferred for one node, with blame data when UNKNOWN."""

    node: Expression
    curvature: Curvature
    failed_child: Optional[int] = None
    failed_clause: Optional[str] = None


def _node_label(node: Expression) -> str:
    if isinstance(node, Variable):
        return f"variable {node.name!r}"
    if isinstance(node, Constant):
        return "constant"
    return node.atom


def _slot_ok(direction: Curvature, child: Curvature, mono: Monotonicity) -> bool:
    if child.is_affine():
        return True
    opposite = (
        Curvature.CONCAVE if direction is Curvature.CONVEX else Curvature.CONVEX
    )
    if child is direction:
        return mono is _ND
    if child is opposite:
        return mono is _NI
    return False


def _direction_check(direction, outer, child_curvs, monos):
    """Composition-rule check toward ``direction``; returns (ok, blame)."""
    if not curvature_under(outer, direction):
        return False, None
    for i, (c, m) in enumerate(zip(child_curvs, monos)):
        if not _slot_ok(direction, c, m):
            return False, i
    return True, None


def _compose(node: AtomApplication, child_curvs) -> CurvatureJudgment:
    desc = atom_info(node.atom)
    monos = desc.arg_monotonicity(len(node.children), node.param)
    outer = desc.curvature

    if all(c is Curvature.CONSTANT for c in child_curvs):
        return CurvatureJudgment(node, Curvature.CONSTANT)
    if outer is Curvature.AFFINE and all(c.is_affine() for c in child_curvs):
        return CurvatureJudgment(node, Curvature.AFFINE)

    cvx_ok, cvx_blame = _direction_check(
        Curvature.CONVEX, outer, child_curvs, monos
    )
    ccv_ok, ccv_blame = _direction_check(
        Curvature.CONCAVE, outer, child_curvs, monos
    )
    if cvx_ok:
        return CurvatureJudgment(node, Curvature.CONVEX)
    if ccv_ok:
        return CurvatureJudgment(node, Curvature.CONCAVE)

    if outer is Curvature.CONVEX:
        blame, want = cvx_blame, Curvature.CONVEX
    elif outer is Curvature.CONCAVE:
        blame, want = ccv_blame, Curvature.CONCAVE
    else:
        blame = cvx_blame if cvx_blame is not None else ccv_blame
        want = Curvature.CONVEX if cvx_blame is not None else Curvature.CONCAVE
    mono = monos[blame]
    found = child_curvs[blame]
    if mono is _ND:
        need = f"{want}"
    elif mono is _NI:
        opp = Curvature.CONCAVE if want is Curvature.CONVEX else Curvature.CONVEX
        need = f"{opp}"
    else:
        need = "log-log affine (the slot is not monotone)"
    clause = (
        f"argument {blame} of {node.atom} must be {need} or log-log affine; "
        f"found {found}"
    )
    return CurvatureJudgment(node, Curvature.UNKNOWN, blame, clause)


def _analyze(node: Expression, memo: dict) -> CurvatureJudgment:
    found = memo.get(id(node))
    if found is not None:
        return found
    if isinstance(node, Constant):
        judgment = CurvatureJudgment(node, Curvature.CONSTANT)
    elif isinstance(node, Variable):
        judgment = CurvatureJudgment(node, Curvature.AFFINE)
    else:
        child_curvs = [_analyze(c, memo).curvature for c in node.children]
        judgment = _compose(node, child_curvs)
    memo[id(node)] = judgment
    return judgment


def curvature(expr: Expression) -> Curvature:
    """Log-log curvature of an expression under the composition rule.

    Total and pure: repeated calls on the same tree agree, and a fresh memo
    table is used per call so concurrent analyses never interact.
    """
    return _analyze(expr, {}).curvature


def _collect(node: Expression, memo: dict, seen: set, out: list) -> None:
    if id(node) in seen:
        return
    seen.add(id(node))
    out.append(memo[id(node)])
    for child in getattr(node, "children", ()):
        _collect(child, memo, seen, out)


def _violation_path(root: Expression, memo: dict) -> list:
    """Root-to-leaf chain of blamed nodes, outermost failure first."""
    path = [root]
    node = root
    while True:
        j = memo[id(node)]
        if j.curvature is not Curvature.UNKNOWN or j.failed_child is None:
            return path
        node = node.children[j.failed_child]
        path.append(node)


@dataclass
class DgpReport:
    """Verification outcome with per-node judgments and diagnostics.

    ``violation_path`` lists the nodes from the outermost failing
    expression down to the first child whose curvature broke the rule; it
    is empty when the problem verifies.
    """

    is_dgp: bool
    objective: list = field(default_factory=list)
    constraints: list = field(default_factory=list)  # (Constraint, lhs js, rhs js)
    violation_path: list = field(default_factory=list)
    message: str = ""

    def describe(self) -> str:
        if self.is_dgp:
            return "DGP: yes"
        lines = ["DGP: no", self.message]
        if self.violation_path:
            lines.append("violation path:")
            for k, node in enumerate(self.violation_path):
                lines.append("  " * (k + 1) + _node_label(node))
        return "\n".join(lines)


def _judgments_for(tree: Expression, memo: dict) -> list:
    _analyze(tree, memo)
    out: list = []
    _collect(tree, memo, set(), out)
    return out


def analyze_problem(problem: Problem):
    """Full verification: report plus the per-node judgment table."""
    memo: dict = {}
    report = DgpReport(is_dgp=True)

    report.objective = _judgments_for(problem.objective, memo)
    for cons in problem.constraints:
        ljs = _judgments_for(cons.lhs, memo)
        rjs = _judgments_for(cons.rhs, memo)
        report.constraints.append((cons, ljs, rjs))

    def fail(site, root, requirement, found):
        report.is_dgp = False
        report.violation_path = _violation_path(root, memo)
        inner = memo[id(report.violation_path[0])]
        detail = inner.failed_clause or f"found {found}"
        report.message = f"{site}: {requirement}; {detail}"

    obj_curv = memo[id(problem.objective)].curvature
    if problem.sense is Sense.MINIMIZE and not obj_curv.is_convex():
        fail(
            "objective",
            problem.objective,
            "Minimize requires log-log convex",
            obj_curv,
        )
    elif problem.sense is Sense.MAXIMIZE and not obj_curv.is_concave():
        fail(
            "objective",
            problem.objective,
            "Maximize requires log-log concave",
            obj_curv,
        )
    else:
        for cons in problem.constraints:
            lc = memo[id(cons.lhs)].curvature
            rc = memo[id(cons.rhs)].curvature
            if cons.op == "leq":
                if not lc.is_convex():
                    fail(
                        f"constraint {cons.id} (lhs)",
                        cons.lhs,
                        "left side of <= requires log-log convex",
                        lc,
                    )
                    break
                if not rc.is_concave():
                    fail(
                        f"constraint {cons.id} (rhs)",
                        cons.rhs,
                        "right side of <= requires log-log concave",
                        rc,
                    )
                    break
            else:
                if not lc.is_affine():
                    fail(
                        f"constraint {cons.id} (lhs)",
                        cons.lhs,
                        "equality requires log-log affine",
                        f"lhs is {lc}",
                    )
                    break
                if not rc.is_affine():
                    fail(
                        f"constraint {cons.id} (rhs)",
                        cons.rhs,
                        "equality requires log-log affine",
                        f"rhs is {rc}",
                    )
                    break
    return report, memo


def explain(problem: Problem) -> DgpReport:
    """Verification report; on failure it names the outermost failing node,
    the violated rule clause, and the curvature found."""
    report, _ = analyze_problem(problem)
    return report


def is_dgp(problem: Problem) -> bool:
    """True iff the problem verifies under the composition rule."""
    return explain(problem).is_dgp


# ---------------------------------------------------------------------------
# numeric probe (test oracle, never used for certification)


class ProbeOutcome(Enum):
    CONSISTENT_CONVEX = "consistent-convex"
    CONSISTENT_CONCAVE = "consistent-concave"
    CONSISTENT_AFFINE = "consistent-affine"
    VIOLATION = "violation"


@dataclass
class ProbeResult:
    outcome: ProbeOutcome
    witness: Optional[float] = None


def _second_order_terms(f, x: float, rel_step: float = 1e-4):
    h = x * rel_step
    fp, f0, fm = f(x + h), f(x), f(x - h)
    d1 = (fp - fm) / (2.0 * h)
    d2 = (fp - 2.0 * f0 + fm) / (h * h)
    return f0, d1, d2


def second_order_residual(f, x: float):
    """Finite-difference value of f'' + f'/x - f'^2/f and its magnitude scale.

    Positive residual is the scalar signature of log-log convexity for
    twice-differentiable functions; negative of log-log concavity; zero of
    monomials.  The scale includes the natural curvature unit f/x^2, which
    also bounds the finite-difference noise floor.
    """
    f0, d1, d2 = _second_order_terms(f, x)
    terms = (d2, d1 / x, d1 * d1 / f0)
    scale = max(max(abs(t) for t in terms), abs(f0) / (x * x), 1e-12)
    return terms[0] + terms[1] - terms[2], scale


def numeric_curvature_probe(
    expr: Expression,
    interval,
    samples: int,
    tol: float = 1e-5,
    seed: int = 0,
) -> ProbeResult:
    """Finite-difference and Jensen consistency check on a scalar expression.

    The expression must be scalar over a single scalar variable.  Sample
    points are log-spaced strictly inside ``interval``; domain errors
    propagate when the interval exits the expression's domain.
    """
    variables = expr.variables()
    if len(variables) != 1 or not variables[0].shape.is_scalar():
        raise ProblemError("probe needs a scalar expression over one scalar variable")
    if not expr.shape.is_scalar():
        raise ProblemError("probe needs a scalar expression")
    name = variables[0].name
    lo, hi = float(interval[0]), float(interval[1])

    def f(x: float) -> float:
        return float(evaluate(expr, {name: x})[0, 0])

    points = np.geomspace(lo * (1.0 + 2e-4), hi * (1.0 - 2e-4), samples)
    residuals = np.empty(samples)
    scales = np.empty(samples)
    for k, x in enumerate(points):
        residuals[k], scales[k] = second_order_residual(f, float(x))

    rel = residuals / scales
    if np.all(np.abs(rel) <= tol):
        claimed = ProbeOutcome.CONSISTENT_AFFINE
    elif np.all(rel >= -tol):
        claimed = ProbeOutcome.CONSISTENT_CONVEX
    elif np.all(rel <= tol):
        claimed = ProbeOutcome.CONSISTENT_CONCAVE
    else:
        witness = float(points[int(np.argmin(rel))])
        return ProbeResult(ProbeOutcome.VIOLATION, witness)

    # randomized Jensen cross-check of the claimed class
    rng = np.random.default_rng(seed)
    for _ in range(max(16, samples // 4)):
        x, y = np.exp(rng.uniform(np.log(points[0]), np.log(points[-1]), size=2))
        theta = rng.choice([0.25, 0.5, 0.75])
        mixed = np.log(f(float(x ** theta * y ** (1.0 - theta))))
        bound = theta * np.log(f(float(x))) + (1.0 - theta) * np.log(f(float(y)))
        gap = mixed - bound
        bad = (
            (claimed is ProbeOutcome.CONSISTENT_AFFINE and abs(gap) > tol)
            or (claimed is ProbeOutcome.CONSISTENT_CONVEX and gap > tol)
            or (claimed is ProbeOutcome.CONSISTENT_CONCAVE and gap < -tol)
        )
        if bad:
            return ProbeResult(ProbeOutcome.VIOLATION, float(x))
    return ProbeResult(claimed)
