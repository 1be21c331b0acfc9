"""Atom registry contents, evaluators against oracles, and monotonicity."""

import numpy as np
import pytest

from conftest import atom_sampler
from llcp import (
    Curvature,
    DomainError,
    Monotonicity,
    ShapeError,
    UnknownAtomError,
    atom_info,
    eval_atom,
    list_atoms,
)
from llcp.atoms import curvature_join, curvature_meet, curvature_under

ALL = Curvature


class TestRegistry:
    def test_nonempty_and_duplicate_free(self):
        atoms = list_atoms()
        names = [a.name for a in atoms]
        assert names and len(names) == len(set(names))

    def test_contains_required_atoms(self):
        names = {a.name for a in list_atoms()}
        assert "pf_eigenvalue" in names
        assert "harmonic_mean" in names
        for required in (
            "add", "mul", "div", "pow", "max", "min", "sum_largest",
            "one_minus", "diff_pos", "geo_mean", "pnorm", "exp", "log",
            "entropy", "trace", "matmul", "eye_minus_inv", "resolvent",
        ):
            assert required in names

    def test_order_deterministic(self):
        assert [a.name for a in list_atoms()] == [a.name for a in list_atoms()]

    def test_lookup_error_lists_near_matches(self):
        with pytest.raises(UnknownAtomError, match="harmonic_mean"):
            atom_info("harmonik_mean")

    def test_add_descriptor(self):
        desc = atom_info("add")
        assert desc.curvature is Curvature.CONVEX
        assert set(desc.arg_monotonicity(3)) == {Monotonicity.NONDECREASING}

    def test_one_minus_descriptor(self):
        desc = atom_info("one_minus")
        assert desc.curvature is Curvature.CONCAVE
        assert desc.arg_monotonicity(1) == (Monotonicity.NONINCREASING,)
        assert "(0, 1)" in desc.domain

    def test_mul_descriptor(self):
        desc = atom_info("mul")
        assert desc.curvature is Curvature.AFFINE
        assert desc.arg_monotonicity(2) == (Monotonicity.NONDECREASING,) * 2

    def test_pow_monotonicity_tracks_sign(self):
        desc = atom_info("pow")
        assert desc.arg_monotonicity(1, 2.0) == (Monotonicity.NONDECREASING,)
        assert desc.arg_monotonicity(1, -1.0) == (Monotonicity.NONINCREASING,)

    def test_entropy_is_not_monotone(self):
        assert atom_info("entropy").arg_monotonicity(1) == (Monotonicity.NEITHER,)


class TestCurvatureLattice:
    def test_order(self):
        assert curvature_under(ALL.CONSTANT, ALL.AFFINE)
        assert curvature_under(ALL.AFFINE, ALL.CONVEX)
        assert curvature_under(ALL.AFFINE, ALL.CONCAVE)
        assert not curvature_under(ALL.CONVEX, ALL.CONCAVE)
        assert curvature_under(ALL.CONCAVE, ALL.UNKNOWN)

    def test_join_meet(self):
        assert curvature_join(ALL.CONVEX, ALL.CONCAVE) is ALL.UNKNOWN
        assert curvature_join(ALL.AFFINE, ALL.CONVEX) is ALL.CONVEX
        assert curvature_meet(ALL.CONVEX, ALL.CONCAVE) is ALL.AFFINE
        assert curvature_meet(ALL.CONSTANT, ALL.UNKNOWN) is ALL.CONSTANT
        for a in ALL:
            assert curvature_join(a, a) is a
            assert curvature_meet(a, a) is a
            for b in ALL:
                assert curvature_join(a, b) is curvature_join(b, a)
                assert curvature_meet(a, b) is curvature_meet(b, a)


class TestEvaluators:
    def test_scalar_eye_minus_inv(self):
        assert eval_atom("eye_minus_inv", [[[0.5]]])[0, 0] == pytest.approx(2.0)

    def test_scalar_pf(self):
        assert eval_atom("pf_eigenvalue", [[[2.0]]])[0, 0] == 2.0

    def test_entropy_fixed_point(self):
        e = np.e
        got = eval_atom("entropy", [1.0 / e])[0, 0]
        assert got == pytest.approx(1.0 / e, rel=1e-14)

    def test_resolvent_against_dense_inverse(self):
        x = np.array([[1.0, 2.0], [3.0, 4.0]])
        got = eval_atom("resolvent", [x], param=6.0)
        want = np.linalg.inv(6.0 * np.eye(2) - x)
        assert np.allclose(got, want, rtol=1e-12)

    def test_pf_matches_eigensolver_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            n = int(rng.integers(1, 7))
            x = np.exp(rng.uniform(-1.5, 1.5, (n, n)))
            got = eval_atom("pf_eigenvalue", [x])[0, 0]
            want = max(abs(np.linalg.eigvals(x)))
            assert got == pytest.approx(want, rel=1e-8)

    def test_eye_minus_inv_against_partial_sums_and_inverse(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            n = int(rng.integers(1, 5))
            x = rng.uniform(0.05, 1.0, (n, n))
            x *= rng.uniform(0.3, 0.9) / max(abs(np.linalg.eigvals(x)))
            got = eval_atom("eye_minus_inv", [x])
            inverse = np.linalg.inv(np.eye(n) - x)
            partial = np.eye(n)
            power = np.eye(n)
            for _ in range(4000):
                power = power @ x
                partial += power
            assert np.allclose(got, inverse, rtol=1e-10)
            assert np.allclose(got, partial, rtol=1e-6)

    def test_sum_largest(self):
        got = eval_atom("sum_largest", [[5.0, 1.0, 3.0]], param=2)
        assert got[0, 0] == 8.0

    def test_geo_and_harmonic_means(self):
        v = np.array([1.0, 4.0])
        assert eval_atom("geo_mean", [v])[0, 0] == pytest.approx(2.0)
        assert eval_atom("harmonic_mean", [v])[0, 0] == pytest.approx(1.6)

    def test_pnorm(self):
        v = np.array([3.0, 4.0])
        assert eval_atom("pnorm", [v], param=2.0)[0, 0] == pytest.approx(5.0)

    def test_matmul_and_trace(self):
        a = np.array([[1.0, 2.0], [3.0, 4.0]])
        assert np.allclose(eval_atom("matmul", [a, a]), a @ a)
        assert eval_atom("trace", [a])[0, 0] == 5.0


class TestDomains:
    def test_log_requires_above_one(self):
        with pytest.raises(DomainError, match="log"):
            eval_atom("log", [1.0])
        with pytest.raises(DomainError):
            eval_atom("log", [0.5])
        assert eval_atom("log", [np.e])[0, 0] == pytest.approx(1.0)

    def test_one_minus_domain(self):
        with pytest.raises(DomainError):
            eval_atom("one_minus", [1.1])

    def test_diff_pos_domain(self):
        with pytest.raises(DomainError):
            eval_atom("diff_pos", [1.0, 2.0])

    def test_eye_minus_inv_radius(self):
        with pytest.raises(DomainError, match="spectral radius"):
            eval_atom("eye_minus_inv", [[[0.6, 0.6], [0.6, 0.6]]])

    def test_resolvent_radius(self):
        with pytest.raises(DomainError):
            eval_atom("resolvent", [[[3.0]]], param=2.0)

    def test_positivity_enforced_everywhere(self):
        with pytest.raises(DomainError):
            eval_atom("add", [1.0, -1.0])

    def test_sum_largest_count_guard(self):
        with pytest.raises(ShapeError):
            eval_atom("sum_largest", [[1.0, 2.0]], param=3)
        with pytest.raises(ShapeError):
            eval_atom("sum_largest", [[1.0, 2.0]], param=0)


class TestMonotonicityMatchesNumerics:
    @pytest.mark.parametrize("desc", list_atoms(), ids=lambda d: d.name)
    def test_declared_monotonicity(self, desc):
        rng = np.random.default_rng(hash(desc.name) % 2 ** 32)
        checks = 0
        while checks < 100:
            draw, param = atom_sampler(desc.name, rng)
            args = draw(rng)
            monos = desc.arg_monotonicity(len(args), param)
            base = eval_atom(desc.name, args, param)
            k = int(rng.integers(0, len(args)))
            if monos[k] is Monotonicity.NEITHER:
                checks += 1
                continue
            bumped = [a.copy() for a in args]
            entry = tuple(rng.integers(0, s) for s in bumped[k].shape)
            bumped[k][entry] *= 1.0 + rng.uniform(0.01, 0.3)
            try:
                after = eval_atom(desc.name, bumped, param)
            except DomainError:
                continue  # perturbation left the domain; redraw
            delta = after - base
            if monos[k] is Monotonicity.NONDECREASING:
                assert np.all(delta >= -1e-12), desc.name
            else:
                assert np.all(delta <= 1e-12), desc.name
            checks += 1
