"""Command-line front end: parse problem files, check, canonicalize, solve.

Problem documents are UTF-8 JSON with top-level keys ``version``,
``variables``, optional ``constants``, ``objective``, and ``constraints``;
expressions are nested prefix-form arrays such as
``["mul", ["var", "x"], ["var", "y"]]``.  Parameterized atoms place the
parameter first (``["pow", 2, ...]``); indexing uses
``["index", expr, row, col]`` and ``["slice", expr, r0, r1, c0, c1]`` with
constant indices.

Exit codes: 0 success/optimal, 1 verification failure, 2 parse error,
3 infeasible, 4 unbounded, 5 iteration limit.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .barrier import SolverSettings, solve as barrier_solve
from .canonicalize import lower, retrieve
from .errors import (
    DgpError,
    DomainError,
    ParseError,
    ProblemError,
    ShapeError,
    UnknownAtomError,
)
from .expressions import (
    AtomApplication,
    Constant,
    Constraint,
    Expression,
    Problem,
    Status,
    Variable,
    apply,
    constant,
    variable,
)

_PARAM_FIRST = ("pow", "sum_largest", "pnorm", "resolvent")
_STATUS_EXIT = {
    Status.OPTIMAL: 0,
    Status.INFEASIBLE: 3,
    Status.UNBOUNDED: 4,
    Status.MAX_ITERATIONS: 5,
}


# ---------------------------------------------------------------------------
# document -> Problem


def _require(cond, code, message):
    if not cond:
        raise ParseError(code, message)


class _DocumentReader:
    def __init__(self, doc):
        _require(isinstance(doc, dict), "schema", "document must be a JSON object")
        _require(doc.get("version") == 1, "schema", "unsupported document version")
        self.doc = doc
        self.variables: "dict[str, Variable]" = {}
        self.constants: dict = {}

    def read(self) -> Problem:
        decls = self.doc.get("variables")
        _require(isinstance(decls, list), "schema", "missing variables")
        for decl in decls:
            self._read_variable(decl)
        for name, value in (self.doc.get("constants") or {}).items():
            try:
                self.constants[name] = constant(value)
            except (DomainError, ShapeError) as err:
                raise ParseError(
                    "nonpositive-constant", f"constant {name!r}: {err}"
                ) from None

        objective = self.doc.get("objective")
        _require(isinstance(objective, dict), "schema", "missing objective")
        sense = objective.get("sense")
        _require(
            sense in ("minimize", "maximize"),
            "schema",
            "objective sense must be 'minimize' or 'maximize'",
        )
        obj_expr = self.expression(objective.get("expr"))

        constraints = []
        for k, item in enumerate(self.doc.get("constraints") or []):
            _require(isinstance(item, dict), "schema", f"constraint {k} malformed")
            kind = item.get("type")
            _require(
                kind in ("leq", "eq"),
                "schema",
                f"constraint {k}: type must be 'leq' or 'eq'",
            )
            lhs = self.expression(item.get("lhs"))
            rhs = self.expression(item.get("rhs"))
            try:
                constraints.append(Constraint(kind, lhs, rhs))
            except ShapeError as err:
                raise ParseError(
                    "shape-mismatch", f"constraint {k}: {err}"
                ) from None
        try:
            return Problem(sense, obj_expr, constraints)
        except ProblemError as err:
            raise ParseError("shape-mismatch", str(err)) from None

    def _read_variable(self, decl) -> None:
        _require(isinstance(decl, dict), "schema", "variable declaration malformed")
        name = decl.get("name")
        _require(
            isinstance(name, str) and name, "schema", "variable needs a name"
        )
        if decl.get("pos", True) is not True:
            raise ParseError("positivity", "all variables must be positive")
        if name in self.variables:
            raise ParseError(
                "duplicate-variable", f"variable {name!r} declared twice"
            )
        shape = decl.get("shape", [1, 1])
        try:
            self.variables[name] = variable(name, tuple(shape))
        except (ShapeError, ProblemError, TypeError, ValueError) as err:
            raise ParseError("schema", f"variable {name!r}: {err}") from None

    def expression(self, node) -> Expression:
        _require(
            isinstance(node, list) and node and isinstance(node[0], str),
            "schema",
            f"expression must be a nonempty prefix array, got {node!r}",
        )
        head, *rest = node
        if head == "var":
            _require(len(rest) == 1, "schema", "var takes exactly one name")
            name = rest[0]
            if name not in self.variables:
                raise ParseError("unknown-variable", f"undeclared variable {name!r}")
            return self.variables[name]
        if head == "const":
            _require(len(rest) == 1, "schema", "const takes exactly one value")
            value = rest[0]
            if isinstance(value, str):
                if value not in self.constants:
                    raise ParseError(
                        "unknown-variable", f"undeclared constant {value!r}"
                    )
                return self.constants[value]
            try:
                return constant(value)
            except (DomainError, ShapeError) as err:
                raise ParseError("nonpositive-constant", str(err)) from None

        try:
            if head in _PARAM_FIRST:
                _require(
                    len(rest) == 2, "schema", f"{head} takes a parameter and a child"
                )
                return apply(head, [self.expression(rest[1])], param=rest[0])
            if head == "index":
                _require(len(rest) == 3, "schema", "index takes expr, row, col")
                return apply(
                    head, [self.expression(rest[0])], param=(rest[1], rest[2])
                )
            if head == "slice":
                _require(len(rest) == 5, "schema", "slice takes expr, r0, r1, c0, c1")
                return apply(
                    head, [self.expression(rest[0])], param=tuple(rest[1:])
                )
            return apply(head, [self.expression(child) for child in rest])
        except UnknownAtomError as err:
            raise ParseError("unknown-atom", str(err)) from None
        except ShapeError as err:
            raise ParseError("shape-mismatch", f"{head}: {err}") from None
        except DomainError as err:
            raise ParseError("nonpositive-constant", str(err)) from None


def parse_problem_file(text: str) -> Problem:
    """Parse a problem document; all failures raise :class:`ParseError`."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise ParseError("syntax", err.msg, err.lineno, err.colno) from None
    return _DocumentReader(doc).read()


# ---------------------------------------------------------------------------
# Problem -> document


def _expr_to_doc(expr: Expression):
    if isinstance(expr, Variable):
        return ["var", expr.name]
    if isinstance(expr, Constant):
        if expr.shape.is_scalar():
            return ["const", float(expr.value[0, 0])]
        return ["const", expr.value.tolist()]
    assert isinstance(expr, AtomApplication)
    if expr.atom in _PARAM_FIRST:
        return [expr.atom, expr.param, _expr_to_doc(expr.children[0])]
    if expr.atom in ("index", "slice"):
        return [expr.atom, _expr_to_doc(expr.children[0]), *expr.param]
    return [expr.atom, *(_expr_to_doc(c) for c in expr.children)]


def serialize_problem(problem: Problem) -> dict:
    """Canonical document for a problem; re-parsing yields the same tree."""
    return {
        "version": 1,
        "variables": [
            {"name": v.name, "shape": list(v.shape), "pos": True}
            for v in problem.variables
        ],
        "objective": {
            "sense": problem.sense.value,
            "expr": _expr_to_doc(problem.objective),
        },
        "constraints": [
            {
                "type": c.op,
                "lhs": _expr_to_doc(c.lhs),
                "rhs": _expr_to_doc(c.rhs),
            }
            for c in problem.constraints
        ],
    }


# ---------------------------------------------------------------------------
# commands


def _load(path: str) -> Problem:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read()
    except OSError as err:
        raise ParseError("io", str(err)) from None
    return parse_problem_file(text)


def _fmt(value: float) -> str:
    return f"{value:.12g}"


def _fmt_array(arr: np.ndarray) -> str:
    if arr.shape == (1, 1):
        return _fmt(float(arr[0, 0]))
    rows = ["  ".join(_fmt(float(v)) for v in row) for row in arr]
    return "[" + "; ".join(rows) + "]"


def cmd_check(path: str, json_out: bool = False) -> int:
    try:
        problem = _load(path)
    except ParseError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    report = problem.explain()
    if json_out:
        record = {
            "is_dgp": report.is_dgp,
            "message": report.message,
            "violation_path": [
                getattr(node, "atom", getattr(node, "name", "constant"))
                for node in report.violation_path
            ],
        }
        print(json.dumps(record, sort_keys=True))
    else:
        print(report.describe())
    return 0 if report.is_dgp else 1


def cmd_canonicalize(path: str) -> int:
    try:
        problem = _load(path)
    except ParseError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    try:
        program, _ = lower(problem)
    except DgpError as err:
        print(err.report.describe())
        return 1
    except DomainError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    print(program.dump())
    return 0


def _settings_from_flags(args) -> SolverSettings:
    verbose = args.verbose or os.environ.get("LLCP_LOG", "") == "debug"
    return SolverSettings(
        mu=args.mu,
        gap_tol=args.tol,
        max_outer=args.max_iters,
        verbose=verbose,
    )


def cmd_solve(path: str, args) -> int:
    try:
        problem = _load(path)
    except ParseError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    try:
        program, rmap = lower(problem)
    except DgpError as err:
        print(err.report.describe())
        return 1
    except DomainError as err:
        # structurally valid data can still sit outside an atom's domain
        # (e.g. the log of a constant at or below 1); that surfaces here
        print(f"error: {err}", file=sys.stderr)
        return 1
    result = barrier_solve(program, _settings_from_flags(args))
    solution = retrieve(rmap, result)

    # report duals under the constraint's document position, which is stable
    # across runs (internal constraint ids are process-global)
    positions = {c.id: k for k, c in enumerate(problem.constraints)}
    duals = {
        positions[cid]: value for cid, value in solution.dual_values.items()
    }

    if args.json:
        record = {
            "status": solution.status.value,
            "optimal_value": solution.optimal_value,
            "variables": {
                name: value.tolist()
                for name, value in solution.variable_values.items()
            },
            "duals": {str(k): duals[k].tolist() for k in sorted(duals)},
            "stats": {
                "outer_iterations": solution.solver_stats.get("outer_iterations"),
                "newton_steps": solution.solver_stats.get("newton_steps"),
                "message": solution.solver_stats.get("message", ""),
            },
        }
        print(json.dumps(record, sort_keys=True))
    else:
        print(f"status: {solution.status.value}")
        print(f"optimal value: {_fmt(solution.optimal_value)}")
        for name, value in solution.variable_values.items():
            print(f"{name}: {_fmt_array(value)}")
        for k in sorted(duals):
            print(f"dual[{k}]: {_fmt_array(duals[k])}")
        message = solution.solver_stats.get("message", "")
        if message:
            print(f"note: {message}")
    return _STATUS_EXIT[solution.status]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="llcp",
        description="Model, verify, canonicalize, and solve log-log convex programs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_check = sub.add_parser("check", help="verify a problem file")
    p_check.add_argument("path")
    p_check.add_argument("--json", action="store_true")

    p_canon = sub.add_parser(
        "canonicalize", help="dump the log-space standard form"
    )
    p_canon.add_argument("path")

    p_solve = sub.add_parser("solve", help="solve a problem file")
    p_solve.add_argument("path")
    p_solve.add_argument("--tol", type=float, default=1e-8)
    p_solve.add_argument("--max-iters", type=int, default=100)
    p_solve.add_argument("--mu", type=float, default=10.0)
    p_solve.add_argument("--verbose", action="store_true")
    p_solve.add_argument("--json", action="store_true")

    args = parser.parse_args(argv)
    if args.command == "check":
        return cmd_check(args.path, args.json)
    if args.command == "canonicalize":
        return cmd_canonicalize(args.path)
    return cmd_solve(args.path, args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
