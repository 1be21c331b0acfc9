"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line, with tolerances and runtime budgets pinned."""

import math
import time

import numpy as np
import llcp
from conftest import (
    COMPLETION_VALUE,
    COMPLETION_X,
    HELLO_DUAL,
    HELLO_VALUE,
    HELLO_X,
    HELLO_Y,
    PROBLEMS_DIR,
    atom_sampler,
    UNARY_SCALAR_INTERVALS,
    UNARY_SCALAR_PARAMS,
)
from llcp import (
    Curvature,
    Problem,
    Status,
    apply,
    constant,
    eval_atom,
    list_atoms,
    parse_problem_file,
    variable,
)
from llcp.analysis import second_order_residual
from llcp.barrier import constraint_value_grad_hess, kkt_residual, solve
from llcp.canonicalize import graph_eye_minus_inv, graph_pf_eigenvalue, lower
from llcp.standard_form import AffineForm, ExpSumConstraint, ProgramBuilder


def _report(number, name, ok, detail=""):
    flag = "PASS" if ok else "FAIL"
    print(f"[acceptance {number}] {name}: {flag}  {detail}")
    assert ok, f"criterion {number} ({name}): {detail}"


def _rel(got, want):
    return abs(got - want) / abs(want)


def _solve_file(name):
    problem = parse_problem_file((PROBLEMS_DIR / name).read_text())
    return problem, problem.solve()


class TestCriterion1HelloWorld:
    def test_hello_world_reproduction(self):
        start = time.perf_counter()
        _, solution = _solve_file("hello_world.llcp")
        elapsed = time.perf_counter() - start

        x = float(solution.variable_values["x"][0, 0])
        y = float(solution.variable_values["y"][0, 0])
        dual = float(next(iter(solution.dual_values.values()))[0, 0])
        errors = {
            "value": _rel(solution.optimal_value, HELLO_VALUE),
            "x": _rel(x, HELLO_X),
            "y": _rel(y, HELLO_Y),
            "dual": _rel(dual, HELLO_DUAL),
        }
        ok = (
            solution.status is Status.OPTIMAL
            and all(err <= 1e-3 for err in errors.values())
            and elapsed < 1.0
        )
        worst = max(errors, key=errors.get)
        _report(
            1,
            "hello-world reproduction",
            ok,
            f"worst rel err {errors[worst]:.2e} ({worst}), {elapsed:.3f}s",
        )


class TestCriterion2Completion:
    def test_pf_matrix_completion(self):
        start = time.perf_counter()
        problem, solution = _solve_file("pf_completion.llcp")
        elapsed = time.perf_counter() - start

        X = solution.variable_values["X"]
        value_err = _rel(solution.optimal_value, COMPLETION_VALUE)
        entry_err = float((np.abs(X - COMPLETION_X) / COMPLETION_X).max())
        product_err = abs(X[0, 1] * X[1, 0] * X[1, 2] * X[2, 2] - 1.0)
        ok = (
            solution.status is Status.OPTIMAL
            and value_err <= 1e-4
            and entry_err <= 1e-3
            and product_err <= 1e-6
            and elapsed < 5.0
        )
        _report(
            2,
            "Perron-Frobenius completion",
            ok,
            f"value {value_err:.2e}, entries {entry_err:.2e}, "
            f"product {product_err:.2e}, {elapsed:.3f}s",
        )


def _log_jensen_gap(desc, args_x, args_y, theta, param):
    mixed = [
        x ** theta * y ** (1.0 - theta) for x, y in zip(args_x, args_y)
    ]
    f_mixed = np.log(eval_atom(desc.name, mixed, param))
    bound = theta * np.log(eval_atom(desc.name, args_x, param)) + (
        1.0 - theta
    ) * np.log(eval_atom(desc.name, args_y, param))
    return f_mixed - bound  # entrywise log-scale gap


class TestCriterion3AtomCurvature:
    def test_curvature_suite(self):
        start = time.perf_counter()
        thetas = (0.0, 0.25, 0.5, 0.75, 1.0)
        failures = []

        for desc in list_atoms():
            rng = np.random.default_rng(abs(hash("jensen:" + desc.name)) % 2 ** 32)
            for pair in range(100):
                draw, param = atom_sampler(desc.name, rng)
                args_x, args_y = draw(rng), draw(rng)
                for theta in thetas:
                    gap = _log_jensen_gap(desc, args_x, args_y, theta, param)
                    if desc.curvature is Curvature.CONVEX:
                        bad = np.any(gap > 1e-9)
                    elif desc.curvature is Curvature.CONCAVE:
                        bad = np.any(gap < -1e-9)
                    else:  # affine atoms satisfy Jensen with equality
                        bad = np.any(np.abs(gap) > 1e-9)
                    if bad:
                        failures.append((desc.name, pair, theta))

        second_order_failures = []
        for name, (lo, hi) in UNARY_SCALAR_INTERVALS.items():
            desc = llcp.atom_info(name)
            param = UNARY_SCALAR_PARAMS.get(name)

            def f(x, _name=name, _param=param):
                return float(eval_atom(_name, [x], _param)[0, 0])

            for x in np.geomspace(lo * 1.001, hi * 0.999, 50):
                residual, scale = second_order_residual(f, float(x))
                rel = residual / scale
                if desc.curvature is Curvature.CONVEX and rel < -1e-5:
                    second_order_failures.append((name, x, rel))
                elif desc.curvature is Curvature.CONCAVE and rel > 1e-5:
                    second_order_failures.append((name, x, rel))
                elif desc.curvature is Curvature.AFFINE and abs(rel) > 1e-5:
                    second_order_failures.append((name, x, rel))

        elapsed = time.perf_counter() - start
        ok = not failures and not second_order_failures and elapsed < 30.0
        _report(
            3,
            "atom curvature suite",
            ok,
            f"jensen failures {failures[:3]}, second-order failures "
            f"{second_order_failures[:3]}, {elapsed:.1f}s",
        )


class TestCriterion4MatrixAtoms:
    def test_matrix_atom_oracles_and_graphs(self):
        start = time.perf_counter()
        rng = np.random.default_rng(20240)

        pf_matrices = []
        for k in range(20):
            n = int(rng.integers(1, 7))
            pf_matrices.append(np.exp(rng.uniform(-1.2, 1.2, (n, n))))
        pf_eval_err = 0.0
        for x in pf_matrices:
            got = float(eval_atom("pf_eigenvalue", [x])[0, 0])
            want = float(max(abs(np.linalg.eigvals(x))))
            pf_eval_err = max(pf_eval_err, _rel(got, want))

        emi_matrices = []
        for k in range(20):
            n = int(rng.integers(1, 5))
            x = rng.uniform(0.05, 1.0, (n, n))
            x *= rng.uniform(0.2, 0.9) / max(abs(np.linalg.eigvals(x)))
            emi_matrices.append(x)
        emi_eval_err = 0.0
        for x in emi_matrices:
            got = eval_atom("eye_minus_inv", [x])
            want = np.linalg.inv(np.eye(x.shape[0]) - x)
            emi_eval_err = max(emi_eval_err, float(np.abs(got / want - 1).max()))

        def const_grid(matrix):
            return [
                [AffineForm.of_constant(math.log(v)) for v in row]
                for row in matrix
            ]

        pf_graph_err = 0.0
        for x in pf_matrices:
            b = ProgramBuilder()
            t, _ = graph_pf_eigenvalue(b, const_grid(x))
            b.set_objective(t)
            res = solve(b.finalize())
            assert res.status is Status.OPTIMAL
            want = float(max(abs(np.linalg.eigvals(x))))
            pf_graph_err = max(pf_graph_err, _rel(math.exp(res.value), want))

        emi_graph_err = 0.0
        for x in emi_matrices:
            n = x.shape[0]
            b = ProgramBuilder()
            w, _ = graph_eye_minus_inv(b, const_grid(x))
            total = AffineForm()
            for row in w:
                for form in row:
                    total = total.plus(form)
            b.set_objective(total)
            res = solve(b.finalize())
            assert res.status is Status.OPTIMAL
            got = np.array(
                [
                    [math.exp(w[i][j].value(res.u)) for j in range(n)]
                    for i in range(n)
                ]
            )
            want = np.linalg.inv(np.eye(n) - x)
            emi_graph_err = max(emi_graph_err, float(np.abs(got / want - 1).max()))

        # spot-check genuine single-entry minimization (the graph's feasible
        # set has a least element, so each entry attains the inverse)
        for x in emi_matrices[:3]:
            n = x.shape[0]
            i, j = int(rng.integers(0, n)), int(rng.integers(0, n))
            b = ProgramBuilder()
            w, _ = graph_eye_minus_inv(b, const_grid(x))
            b.set_objective(w[i][j])
            res = solve(b.finalize())
            assert res.status is Status.OPTIMAL
            want = float(np.linalg.inv(np.eye(n) - x)[i, j])
            emi_graph_err = max(emi_graph_err, _rel(math.exp(res.value), want))

        elapsed = time.perf_counter() - start
        ok = (
            pf_eval_err <= 1e-6
            and emi_eval_err <= 1e-5
            and pf_graph_err <= 1e-4
            and emi_graph_err <= 1e-4
            and elapsed < 30.0
        )
        _report(
            4,
            "matrix-atom oracles",
            ok,
            f"pf eval {pf_eval_err:.2e}, inv eval {emi_eval_err:.2e}, "
            f"pf graph {pf_graph_err:.2e}, inv graph {emi_graph_err:.2e}, "
            f"{elapsed:.1f}s",
        )


def _ggp_cases():
    x, y = variable("x"), variable("y")
    z = variable("z", (2, 1))
    z0 = apply("index", [z], param=(0, 0))
    z1 = apply("index", [z], param=(1, 0))
    return [
        ("bound", Problem("minimize", x, [constant(2.0) <= x]), 2.0),
        ("am-gm", Problem("minimize", x + y, [x * y >= 4.0]), 4.0),
        ("shifted bound", Problem("minimize", x, [x >= 5.0]), 5.0),
        (
            "product of bounds",
            Problem("minimize", x * y, [x >= 2.0, y >= 3.0]),
            6.0,
        ),
        (
            "weighted monomial",
            Problem("minimize", x ** 2.0 * y, [x >= 2.0, y >= 1.5]),
            6.0,
        ),
        (
            "asymmetric am-gm",
            Problem("minimize", x + y, [x * y ** 2.0 >= 8.0]),
            3.0 * 2.0 ** (1.0 / 3.0),
        ),
        ("maximize bound", Problem("maximize", x, [x <= 10.0]), 10.0),
        (
            "minimax",
            Problem("minimize", apply("max", [x, y]), [x * y >= 9.0]),
            3.0,
        ),
        (
            "norm with product floor",
            Problem(
                "minimize", apply("pnorm", [z], param=2.0), [z0 * z1 >= 2.0]
            ),
            2.0,
        ),
        (
            "ratio corner",
            Problem("minimize", x / y, [y <= 3.0, x >= 6.0]),
            2.0,
        ),
    ]


class TestCriterion5GgpRegression:
    def test_analytic_gp_suite(self):
        worst = ("", 0.0)
        for name, problem, want in _ggp_cases():
            solution = problem.solve()
            assert solution.status is Status.OPTIMAL, name
            err = _rel(solution.optimal_value, want)
            if err > worst[1]:
                worst = (name, err)
        ok = worst[1] <= 1e-6
        _report(
            5,
            "GGP-subset regression",
            ok,
            f"10 instances, worst rel err {worst[1]:.2e} ({worst[0]})",
        )


def _grid_cases():
    x, y = variable("x"), variable("y")
    z = variable("z", (2, 1))
    z0 = apply("index", [z], param=(0, 0))
    z1 = apply("index", [z], param=(1, 0))
    inv = apply("eye_minus_inv", [y])
    return [
        (
            "am-gm",
            Problem("minimize", x + y, [x * y >= 4.0]),
            ("x", "y"),
            (0.5, 8.0, 0.5, 8.0),
            lambda a, b: a + b,
            lambda a, b: a * b >= 4.0,
            "min",
        ),
        (
            "minimax",
            Problem("minimize", apply("max", [x, y]), [x * y >= 9.0]),
            ("x", "y"),
            (1.0, 10.0, 1.0, 10.0),
            lambda a, b: np.maximum(a, b),
            lambda a, b: a * b >= 9.0,
            "min",
        ),
        (
            "ratio corner",
            Problem("minimize", x / y, [y <= 3.0, x >= 6.0]),
            ("x", "y"),
            (5.0, 12.0, 0.5, 3.5),
            lambda a, b: a / b,
            lambda a, b: (b <= 3.0) & (a >= 6.0),
            "min",
        ),
        (
            "inverse tradeoff",
            Problem("minimize", x + inv, [x * y >= 0.5]),
            ("x", "y"),
            (0.3, 10.0, 0.05, 0.95),
            lambda a, b: a + 1.0 / (1.0 - b),
            lambda a, b: a * b >= 0.5,
            "min",
        ),
        (
            "harmonic budget",
            Problem(
                "maximize", apply("harmonic_mean", [z]), [z0 + z1 <= 4.0]
            ),
            ("z0", "z1"),
            (0.5, 4.0, 0.5, 4.0),
            lambda a, b: 2.0 / (1.0 / a + 1.0 / b),
            lambda a, b: a + b <= 4.0,
            "max",
        ),
    ]


class TestCriterion6BruteForce:
    def test_grid_search_equivalence(self):
        worst = ("", 0.0)
        for name, problem, _, box, objective, feasible, direction in _grid_cases():
            solution = problem.solve()
            assert solution.status is Status.OPTIMAL, name
            lo_a, hi_a, lo_b, hi_b = box
            a = np.geomspace(lo_a, hi_a, 400)
            b = np.geomspace(lo_b, hi_b, 400)
            A, B = np.meshgrid(a, b, indexing="ij")
            values = objective(A, B)
            mask = feasible(A, B)
            assert mask.any(), name
            grid_opt = (
                values[mask].min() if direction == "min" else values[mask].max()
            )
            err = _rel(solution.optimal_value, grid_opt)
            if err > worst[1]:
                worst = (name, err)
        ok = worst[1] <= 1e-2
        _report(
            6,
            "brute-force equivalence",
            ok,
            f"5 instances vs 400x400 grids, worst rel err {worst[1]:.2e} "
            f"({worst[0]})",
        )


class TestCriterion7SolverContract:
    def test_kkt_thresholds_on_all_optimal_solves(self):
        problems = [
            parse_problem_file((PROBLEMS_DIR / "hello_world.llcp").read_text()),
            parse_problem_file((PROBLEMS_DIR / "pf_completion.llcp").read_text()),
        ]
        problems.extend(case[1] for case in _ggp_cases())
        problems.extend(case[1] for case in _grid_cases())
        worst = (0.0, 0.0, 0.0)
        for problem in problems:
            program, _ = lower(problem)
            result = solve(program)
            assert result.status is Status.OPTIMAL
            stationarity, primal, comp = kkt_residual(
                program, result.u, result.ineq_duals, result.eq_duals
            )
            assert np.all(result.ineq_duals >= 0.0)
            worst = (
                max(worst[0], stationarity),
                max(worst[1], primal),
                max(worst[2], comp),
            )
        thresholds_ok = worst[0] <= 1e-6 and worst[1] <= 1e-8 and worst[2] <= 1e-6

        rng = np.random.default_rng(777)
        n = 6
        structures = {
            "affine": (0, True),
            "single-term": (1, False),
            "multi-term": (4, False),
            "mixed": (2, True),
        }
        fd_ok = True
        for term_count, with_tail in structures.values():
            for _ in range(100):
                terms = []
                for _ in range(term_count):
                    coeffs = {
                        int(i): float(rng.normal())
                        for i in rng.choice(n, 2, replace=False)
                    }
                    terms.append(AffineForm(coeffs, float(rng.normal() * 0.2)))
                tail = (
                    AffineForm(
                        {int(rng.integers(0, n)): float(rng.normal())},
                        float(rng.normal()),
                    )
                    if with_tail
                    else AffineForm()
                )
                cons = ExpSumConstraint(tuple(terms), tail, origin="fd")
                u = rng.uniform(-1.0, 1.0, n)
                value, grad, hess = constraint_value_grad_hess(cons, u)
                d = rng.normal(size=n)
                d /= np.linalg.norm(d)
                step = 1e-6
                vp, gp, _ = constraint_value_grad_hess(cons, u + step * d)
                vm, gm, _ = constraint_value_grad_hess(cons, u - step * d)
                directional = float(grad @ d)
                fd_grad = (vp - vm) / (2 * step)
                scale = max(abs(directional), abs(fd_grad), 1e-10)
                if abs(fd_grad - directional) / scale > 1e-6:
                    fd_ok = False
                fd_hess = (gp - gm) / (2 * step)
                model = hess @ d
                hess_scale = max(np.abs(model).max(), np.abs(fd_hess).max(), 1e-8)
                if np.abs(fd_hess - model).max() / hess_scale > 1e-4:
                    fd_ok = False

        ok = thresholds_ok and fd_ok
        _report(
            7,
            "solver contract",
            ok,
            f"worst stationarity {worst[0]:.2e}, primal {worst[1]:.2e}, "
            f"complementarity {worst[2]:.2e}, derivatives "
            f"{'ok' if fd_ok else 'failed'}",
        )


class TestCriterion8StatusMapping:
    def test_status_mapping(self):
        unbounded = parse_problem_file(
            (PROBLEMS_DIR / "unbounded.llcp").read_text()
        ).solve()
        infeasible = parse_problem_file(
            (PROBLEMS_DIR / "infeasible.llcp").read_text()
        ).solve()
        ok = (
            unbounded.status is Status.UNBOUNDED
            and unbounded.optimal_value == 0.0
            and infeasible.status is Status.INFEASIBLE
        )
        _report(
            8,
            "status mapping",
            ok,
            f"unbounded -> {unbounded.status.value} (value "
            f"{unbounded.optimal_value}), contradictory pair -> "
            f"{infeasible.status.value}",
        )
