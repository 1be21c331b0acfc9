"""Lowering verified problems to the log-space standard form, and mapping
solver output back to the original variables, constraints, and duals.

Every tree node lowers to an affine form over the canonical coordinates
``u``.  Log-log affine nodes combine their children's forms directly
(products become sums, ratios differences, powers scalings, constants their
logarithms).  Non-affine nodes introduce a fresh auxiliary coordinate per
output entry, linked by epigraph (convex) or hypograph (concave)
inequalities; the linkage is an inequality, and optimality forces it tight.

When a non-affine atom sits at the root of a user constraint and its graph
is a single inequality per entry, the graph is emitted directly against the
opposing side's form instead of a fresh auxiliary; that constraint is the
user constraint's *principal* canonical constraint, whose dual is reported
back.  Otherwise the principal constraint is the affine row linking the two
lowered sides.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analysis import _analyze, analyze_problem
from .atoms import Curvature, perron_pair, sum_largest_subsets
from .errors import DgpError, LlcpError
from .expressions import (
    AtomApplication,
    Constant,
    Expression,
    Problem,
    Sense,
    Solution,
    Status,
    Variable,
    apply,
    constant,
    evaluate,
)
from .standard_form import AffineForm, ExpSumProgram, ProgramBuilder

# non-affine atoms whose graph is one inequality per output entry; these may
# be emitted directly against a target form
_FOLDABLE_CONVEX = {"add", "exp", "pnorm", "trace", "matmul"}
_FOLDABLE_CONCAVE = {"one_minus", "diff_pos", "harmonic_mean", "log", "entropy"}


@dataclass
class RetrievalMap:
    """Correspondence from the original problem to the canonical program."""

    problem: Problem
    var_coords: dict  # name -> int array (rows, cols)
    cons_kind: dict  # constraint id -> "ineq" | "eq"
    cons_principal: dict  # constraint id -> int array of canonical indices
    objective_offset: float
    sense: Sense
    coords: tuple = ()  # CoordInfo metadata of the canonical program


def _grid(shape, fn):
    return [[fn(i, j) for j in range(shape.cols)] for i in range(shape.rows)]


def _entry(grid, i, j):
    """Broadcast-aware element access (1x1 grids broadcast everywhere)."""
    if len(grid) == 1 and len(grid[0]) == 1:
        return grid[0][0]
    return grid[i][j]


class _Lowerer:
    def __init__(self, problem: Problem):
        report, memo = analyze_problem(problem)
        if not report.is_dgp:
            raise DgpError(report)
        self.problem = problem
        self.judgments = memo
        self.builder = ProgramBuilder()
        self.memo: dict = {}
        self.var_coords: dict = {}

    # -- coordinates ---------------------------------------------------------
    def _alloc_variables(self) -> None:
        for v in self.problem.variables:
            rows, cols = v.shape
            grid = np.empty((rows, cols), dtype=np.int64)
            for i in range(rows):
                for j in range(cols):
                    name = v.name if v.shape.is_scalar() else f"{v.name}[{i},{j}]"
                    grid[i, j] = self.builder.new_coord(
                        name, "variable", expr=v, detail=(i, j)
                    )
            self.var_coords[v.name] = grid

    def _aux(self, node, kind_label: str, i: int, j: int) -> AffineForm:
        idx = self.builder.new_coord(
            f"{kind_label}.t{self.builder.num_coords}[{i},{j}]",
            "atom_value",
            expr=node,
            detail=(i, j),
        )
        return AffineForm.coordinate(idx)

    # -- expression lowering ---------------------------------------------------
    def forms(self, node: Expression):
        found = self.memo.get(id(node))
        if found is not None:
            return found
        if isinstance(node, Constant):
            grid = _grid(
                node.shape, lambda i, j: AffineForm.of_constant(math.log(node.value[i, j]))
            )
        elif isinstance(node, Variable):
            coords = self.var_coords[node.name]
            grid = _grid(node.shape, lambda i, j: AffineForm.coordinate(coords[i, j]))
        else:
            grid = self._lower_atom(node)
        self.memo[id(node)] = grid
        return grid

    def _curvature(self, node) -> Curvature:
        # rewrites (resolvent) introduce nodes unseen by the problem analysis
        found = self.judgments.get(id(node))
        if found is None:
            found = _analyze(node, self.judgments)
        return found.curvature

    def _lower_atom(self, node: AtomApplication):
        curv = self._curvature(node)
        if curv is Curvature.CONSTANT:
            value = evaluate(node, {})
            return _grid(
                node.shape, lambda i, j: AffineForm.of_constant(math.log(value[i, j]))
            )

        name = node.atom
        if name == "mul":
            a, b = (self.forms(c) for c in node.children)
            return _grid(node.shape, lambda i, j: _entry(a, i, j).plus(_entry(b, i, j)))
        if name == "div":
            a, b = (self.forms(c) for c in node.children)
            return _grid(node.shape, lambda i, j: _entry(a, i, j).minus(_entry(b, i, j)))
        if name == "pow":
            z = self.forms(node.children[0])
            return _grid(node.shape, lambda i, j: z[i][j].scaled(node.param))
        if name == "geo_mean":
            z = self.forms(node.children[0])
            n = node.children[0].shape.rows
            total = AffineForm()
            for i in range(n):
                total = total.plus(z[i][0])
            return [[total.scaled(1.0 / n)]]
        if name == "index":
            z = self.forms(node.children[0])
            i, j = node.param
            return [[z[i][j]]]
        if name == "slice":
            z = self.forms(node.children[0])
            r0, r1, c0, c1 = node.param
            return [row[c0:c1] for row in z[r0:r1]]

        if name == "resolvent":
            # (sI - X)^{-1} = (1/s) (I - X/s)^{-1}; lower the rewritten tree
            s = node.param
            rewritten = apply(
                "mul",
                [
                    constant(1.0 / s),
                    apply("eye_minus_inv", [apply("div", [node.children[0], constant(s)])]),
                ],
            )
            return self.forms(rewritten)
        if name == "eye_minus_inv":
            u_grid = self.forms(node.children[0])
            v_grid, _ = graph_eye_minus_inv(self.builder, u_grid, node=node)
            return v_grid
        if name == "pf_eigenvalue":
            u_grid = self.forms(node.children[0])
            t_form, _ = graph_pf_eigenvalue(self.builder, u_grid, node=node)
            return [[t_form]]

        # generic epigraph/hypograph auxiliary per output entry
        targets = _grid(node.shape, lambda i, j: self._aux(node, name, i, j))
        self._emit_graph(node, targets, origin=name, principal=False)
        return targets

    # -- graph emission ---------------------------------------------------------
    def _emit_graph(self, node, targets, origin: str, principal: bool):
        """Emit the atom's graph with the given output target forms.

        Returns an int array of emitted constraint indices (one per output
        entry) for single-constraint graphs, or None.
        """
        name = node.atom
        kids = [self.forms(c) for c in node.children]
        builder = self.builder
        shape = node.shape
        indices = np.full((shape.rows, shape.cols), -1, dtype=np.int64)

        def single(i, j, terms, tail):
            indices[i, j] = builder.add_inequality(terms, tail, origin, principal)

        if name == "add":
            for i in range(shape.rows):
                for j in range(shape.cols):
                    t = _entry(targets, i, j)
                    terms = [_entry(z, i, j).minus(t) for z in kids]
                    single(i, j, terms, AffineForm.of_constant(-1.0))
        elif name == "exp":
            for i in range(shape.rows):
                for j in range(shape.cols):
                    t = _entry(targets, i, j)
                    single(i, j, [_entry(kids[0], i, j)], t.scaled(-1.0))
        elif name == "pnorm":
            t = targets[0][0]
            p = node.param
            terms = [
                kids[0][i][0].scaled(p).minus(t.scaled(p))
                for i in range(node.children[0].shape.rows)
            ]
            single(0, 0, terms, AffineForm.of_constant(-1.0))
        elif name == "trace":
            t = targets[0][0]
            terms = [
                kids[0][i][i].minus(t) for i in range(node.children[0].shape.rows)
            ]
            single(0, 0, terms, AffineForm.of_constant(-1.0))
        elif name == "matmul":
            inner = node.children[0].shape.cols
            for i in range(shape.rows):
                for j in range(shape.cols):
                    t = _entry(targets, i, j)
                    terms = [
                        kids[0][i][k].plus(kids[1][k][j]).minus(t)
                        for k in range(inner)
                    ]
                    single(i, j, terms, AffineForm.of_constant(-1.0))
        elif name == "one_minus":
            for i in range(shape.rows):
                for j in range(shape.cols):
                    t = _entry(targets, i, j)
                    single(
                        i, j, [t, _entry(kids[0], i, j)], AffineForm.of_constant(-1.0)
                    )
        elif name == "diff_pos":
            for i in range(shape.rows):
                for j in range(shape.cols):
                    t = _entry(targets, i, j)
                    z1 = _entry(kids[0], i, j)
                    z2 = _entry(kids[1], i, j)
                    single(
                        i,
                        j,
                        [t.minus(z1), z2.minus(z1)],
                        AffineForm.of_constant(-1.0),
                    )
        elif name == "harmonic_mean":
            t = targets[0][0]
            n = node.children[0].shape.rows
            terms = [
                t.minus(kids[0][i][0]).shifted(-math.log(n)) for i in range(n)
            ]
            single(0, 0, terms, AffineForm.of_constant(-1.0))
        elif name == "log":
            for i in range(shape.rows):
                for j in range(shape.cols):
                    t = _entry(targets, i, j)
                    single(i, j, [t], _entry(kids[0], i, j).scaled(-1.0))
        elif name == "entropy":
            for i in range(shape.rows):
                for j in range(shape.cols):
                    t = _entry(targets, i, j)
                    z = _entry(kids[0], i, j)
                    single(i, j, [t.minus(z)], z)
        elif name == "max":
            for i in range(shape.rows):
                for j in range(shape.cols):
                    tt = _entry(targets, i, j)
                    for z in kids:
                        builder.add_inequality(
                            (), _entry(z, i, j).minus(tt), origin, False
                        )
            return None
        elif name == "min":
            for i in range(shape.rows):
                for j in range(shape.cols):
                    tt = _entry(targets, i, j)
                    for z in kids:
                        builder.add_inequality(
                            (), tt.minus(_entry(z, i, j)), origin, False
                        )
            return None
        elif name == "sum_largest":
            t = targets[0][0]
            n = node.children[0].shape.rows
            for subset in sum_largest_subsets(n, node.param):
                terms = [kids[0][i][0].minus(t) for i in subset]
                builder.add_inequality(
                    terms, AffineForm.of_constant(-1.0), origin, False
                )
            return None
        else:  # pragma: no cover - registry and lowering table kept in sync
            raise LlcpError(f"no lowering rule for atom {name!r}")
        return indices

    # -- constraints ------------------------------------------------------------
    def _lower_constraint(self, cons):
        shape = cons.shape
        origin = f"constraint {cons.id}"
        if cons.op == "eq":
            lhs = self.forms(cons.lhs)
            rhs = self.forms(cons.rhs)
            indices = np.empty((shape.rows, shape.cols), dtype=np.int64)
            for i in range(shape.rows):
                for j in range(shape.cols):
                    row = _entry(lhs, i, j).minus(_entry(rhs, i, j))
                    indices[i, j] = self.builder.add_equality(row, origin)
            return "eq", indices

        lc = self.judgments[id(cons.lhs)].curvature
        rc = self.judgments[id(cons.rhs)].curvature
        # a side folds only when it spans the whole constraint (a 1x1 side
        # against a matrix side must go through the per-entry affine path)
        if (
            isinstance(cons.lhs, AtomApplication)
            and cons.lhs.atom in _FOLDABLE_CONVEX
            and lc is Curvature.CONVEX
            and cons.lhs.shape == shape
        ):
            rhs = self.forms(cons.rhs)
            indices = self._emit_graph(
                cons.lhs, _broadcast_grid(rhs, shape), origin, principal=True
            )
            return "ineq", indices
        if (
            isinstance(cons.rhs, AtomApplication)
            and cons.rhs.atom in _FOLDABLE_CONCAVE
            and rc is Curvature.CONCAVE
            and cons.rhs.shape == shape
        ):
            lhs = self.forms(cons.lhs)
            indices = self._emit_graph(
                cons.rhs, _broadcast_grid(lhs, shape), origin, principal=True
            )
            return "ineq", indices

        lhs = self.forms(cons.lhs)
        rhs = self.forms(cons.rhs)
        indices = np.empty((shape.rows, shape.cols), dtype=np.int64)
        for i in range(shape.rows):
            for j in range(shape.cols):
                tail = _entry(lhs, i, j).minus(_entry(rhs, i, j))
                indices[i, j] = self.builder.add_inequality(
                    (), tail, origin, principal=True
                )
        return "ineq", indices

    # -- driver -------------------------------------------------------------------
    def run(self):
        problem = self.problem
        self._alloc_variables()

        obj_form = self.forms(problem.objective)[0][0]
        offset = obj_form.const
        linear = AffineForm(obj_form.coeffs)
        if problem.sense is Sense.MAXIMIZE:
            linear = linear.scaled(-1.0)
        self.builder.set_objective(linear)

        cons_kind, cons_principal = {}, {}
        for cons in problem.constraints:
            kind, indices = self._lower_constraint(cons)
            cons_kind[cons.id] = kind
            cons_principal[cons.id] = indices

        program = self.builder.finalize()
        rmap = RetrievalMap(
            problem=problem,
            var_coords=self.var_coords,
            cons_kind=cons_kind,
            cons_principal=cons_principal,
            objective_offset=offset,
            sense=problem.sense,
            coords=program.coords,
        )
        return program, rmap


def _broadcast_grid(grid, shape):
    if len(grid) == shape.rows and len(grid[0]) == shape.cols:
        return grid
    return _grid(shape, lambda i, j: _entry(grid, i, j))


def graph_pf_eigenvalue(builder: ProgramBuilder, u_grid, node=None):
    """Spectral-radius epigraph over n x n affine forms.

    Introduces ``t`` (log of the eigenvalue bound) and ``nu`` (log of a
    positive eigenvector) with the constraints
    ``sum_j exp(U_ij + nu_j - t - nu_i) - 1 <= 0`` for each row ``i``;
    feasibility of ``(t, nu)`` is exactly ``lambda_pf <= e^t``.
    Returns the form of ``t`` and the emitted constraints.
    """
    n = len(u_grid)
    t_idx = builder.new_coord(
        f"pf_eigenvalue.t{builder.num_coords}", "atom_value", expr=node, detail=(0, 0)
    )
    nu = [
        builder.new_coord(
            f"pf_eigenvalue.v{builder.num_coords}[{i}]",
            "pf_vector",
            expr=node,
            detail=(i,),
        )
        for i in range(n)
    ]
    t = AffineForm.coordinate(t_idx)
    constraints = []
    for i in range(n):
        terms = []
        for j in range(n):
            form = (
                u_grid[i][j]
                .plus(AffineForm.coordinate(nu[j]))
                .minus(t)
                .minus(AffineForm.coordinate(nu[i]))
            )
            terms.append(form)
        k = builder.add_inequality(
            terms, AffineForm.of_constant(-1.0), "pf_eigenvalue", False
        )
        constraints.append(k)
    return t, constraints


def graph_eye_minus_inv(builder: ProgramBuilder, u_grid, node=None):
    """Entrywise epigraph of ``X -> (I - X)^{-1}`` over n x n affine forms.

    Introduces ``W = log Y`` with the constraints
    ``sum_k exp(W_ik + U_kj - W_ij) + [i = j] exp(-W_ij) - 1 <= 0``,
    the log-space image of ``Y X + I <= Y``;  the output forms are ``W``
    itself (the epigraph bound is taken tight), and feasibility forces
    ``Y >= (I - X)^{-1}`` entrywise.
    Returns the output form grid and the emitted constraints.
    """
    n = len(u_grid)
    w = [
        [
            AffineForm.coordinate(
                builder.new_coord(
                    f"eye_minus_inv.y{builder.num_coords}[{i},{j}]",
                    "atom_value",
                    expr=node,
                    detail=(i, j),
                )
            )
            for j in range(n)
        ]
        for i in range(n)
    ]
    constraints = []
    for i in range(n):
        for j in range(n):
            terms = [w[i][k].plus(u_grid[k][j]).minus(w[i][j]) for k in range(n)]
            if i == j:
                terms.append(w[i][j].scaled(-1.0))
            k = builder.add_inequality(
                terms, AffineForm.of_constant(-1.0), "eye_minus_inv", False
            )
            constraints.append(k)
    return w, constraints


def lower(problem: Problem):
    """Lower a verified problem to ``(ExpSumProgram, RetrievalMap)``.

    Raises :class:`DgpError` carrying the verification report when the
    problem fails the composition rules.
    """
    return _Lowerer(problem).run()


def retrieve(rmap: RetrievalMap, result) -> Solution:
    """Map a solver result on the canonical program back to the original
    problem: variable values are exponentials of their coordinates, the
    optimal value is the exponential of the canonical optimum, and each
    constraint reports the dual of its principal canonical constraint."""
    sense = rmap.sense
    status = result.status

    if status is Status.UNBOUNDED:
        value = 0.0 if sense is Sense.MINIMIZE else math.inf
        return Solution(status, value, {}, {}, _stats(rmap, result))
    if status is Status.INFEASIBLE:
        value = math.inf if sense is Sense.MINIMIZE else 0.0
        return Solution(status, value, {}, {}, _stats(rmap, result))
    if status is Status.MAX_ITERATIONS and result.u is None:
        # the solver gave up before producing an iterate (e.g. phase I
        # ended on a feasibility boundary)
        return Solution(status, math.nan, {}, {}, _stats(rmap, result))

    canon = result.value
    log_opt = (
        canon + rmap.objective_offset
        if sense is Sense.MINIMIZE
        else -canon + rmap.objective_offset
    )
    value = math.exp(log_opt)

    u = result.u
    if rmap.coords and (u is None or u.size != len(rmap.coords)):
        raise LlcpError(
            "retrieval map does not match the solved program "
            f"({len(rmap.coords)} coordinates expected)"
        )
    var_values = {
        name: np.exp(u[coords]) for name, coords in rmap.var_coords.items()
    }
    duals = {}
    for cid, kind in rmap.cons_kind.items():
        idx = rmap.cons_principal[cid]
        source = result.ineq_duals if kind == "ineq" else result.eq_duals
        duals[cid] = source[idx]
    return Solution(status, value, var_values, duals, _stats(rmap, result))


def _stats(rmap: RetrievalMap, result) -> dict:
    stats = {
        "status": result.status.value,
        "outer_iterations": result.iterations,
        "newton_steps": result.newton_steps,
        "canonical_value": result.value,
        "message": result.message,
    }
    if result.kkt is not None:
        stats["kkt_residuals"] = result.kkt
    u = result.u
    if u is not None and u.size == len(rmap.coords) and np.all(np.isfinite(u)):
        # diagnostic only: auxiliary quantities carry no correctness guarantee
        stats["aux_values"] = {
            info.name: math.exp(u[info.index])
            for info in rmap.coords
            if info.kind != "variable"
        }
    return stats


def tight_embedding(program: ExpSumProgram, rmap: RetrievalMap, assignment) -> np.ndarray:
    """Canonical point for an original assignment with tight auxiliaries.

    Variable coordinates are logs of the assigned values; every auxiliary
    takes the log of its defining atom's value (Perron-vector coordinates
    take the log of the eigenvector).  At a strictly feasible assignment
    the embedded point is feasible in the canonical program.
    """
    u = np.empty(program.n)
    value_cache: dict = {}

    def node_value(expr):
        found = value_cache.get(id(expr))
        if found is None:
            found = evaluate(expr, assignment)
            value_cache[id(expr)] = found
        return found

    for info in program.coords:
        if info.kind == "variable":
            i, j = info.detail
            arr = np.asarray(assignment[info.expr.name], dtype=float)
            if arr.ndim == 0:
                arr = arr.reshape(1, 1)
            elif arr.ndim == 1:
                arr = arr.reshape(-1, 1)
            u[info.index] = math.log(arr[i, j])
        elif info.kind == "atom_value":
            i, j = info.detail
            u[info.index] = math.log(node_value(info.expr)[i, j])
        elif info.kind == "pf_vector":
            (i,) = info.detail
            x = node_value(info.expr.children[0])
            _, vec = perron_pair(x)
            u[info.index] = math.log(vec[i])
        else:  # pragma: no cover - slack coords never appear in lowered programs
            raise LlcpError(f"cannot embed coordinate kind {info.kind!r}")
    return u
