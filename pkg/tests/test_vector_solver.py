import numpy as np
import pytest

from setrep import (
    DegenerateConstraintError,
    FeatureSet,
    SingularSystemError,
    VectorCRParams,
    assemble_system,
    concat_gallery,
    objective_vector,
    solve_vector_hull,
)
from setrep.vector_solver import stationarity_residual

from .conftest import random_vector_instance
from .oracles import vector_oracle


def small_instance():
    Y = FeatureSet([[1.0], [0.0]])
    gallery = concat_gallery([(0, FeatureSet([[1.0, 0.0], [0.0, 1.0]]))])
    return Y, gallery


class TestAssemble:
    def test_direct_construction(self):
        Y, gallery = small_instance()
        A, B, dvec = assemble_system(Y, gallery, VectorCRParams(1.0, 1.0))
        assert A.shape == (2, 3)
        assert np.array_equal(A, [[1.0, -1.0, 0.0], [0.0, 0.0, -1.0]])
        assert np.array_equal(B, np.eye(3))
        assert np.array_equal(dvec, [1.0, 0.0, 0.0])

    def test_unequal_lambdas(self):
        Y, gallery = small_instance()
        _, B, _ = assemble_system(Y, gallery, VectorCRParams(0.0, 3.0))
        assert np.array_equal(np.diag(B), [0.0, 3.0, 3.0])

    def test_dimension_mismatch(self):
        Y = FeatureSet(np.ones((3, 1)))
        gallery = concat_gallery([(0, FeatureSet(np.ones((2, 2))))])
        with pytest.raises(Exception, match="d="):
            assemble_system(Y, gallery, VectorCRParams())


class TestSolve:
    def test_single_query_map_forces_alpha_one(self, rng):
        d, n_b = 6, 5
        y = rng.standard_normal((d, 1))
        X = rng.standard_normal((d, n_b))
        gallery = concat_gallery([(0, FeatureSet(X))])
        lam2 = 0.5
        sol = solve_vector_hull(FeatureSet(y), gallery, VectorCRParams(1e-3, lam2))
        assert sol.alpha == pytest.approx([1.0], abs=1e-12)
        ridge = np.linalg.solve(X.T @ X + lam2 * np.eye(n_b), X.T @ y[:, 0])
        assert sol.beta == pytest.approx(ridge, abs=1e-9)

    def test_query_equal_to_one_class(self, rng):
        X_c = rng.standard_normal((8, 3))
        gallery = concat_gallery(
            [(0, FeatureSet(rng.standard_normal((8, 3)))), (1, FeatureSet(X_c))]
        )
        query = FeatureSet(X_c)
        params = VectorCRParams(1e-6, 1e-6)
        sol = solve_vector_hull(query, gallery, params)
        X = gallery.stacked_matrix()
        rep = np.linalg.norm(X_c @ sol.alpha - X @ sol.beta)
        assert rep <= 1e-3
        _, _, obj_ref = vector_oracle(X_c, X, 1e-6, 1e-6)
        assert sol.diagnostics.objective == pytest.approx(obj_ref, rel=1e-6, abs=1e-12)

    def test_constraint_always_tight(self, rng):
        for _ in range(20):
            query, gallery, _, _ = random_vector_instance(rng)
            sol = solve_vector_hull(query, gallery, VectorCRParams(1e-2, 1e-2))
            assert sol.constraint_gap <= 1e-10

    def test_stationarity(self, rng):
        for _ in range(10):
            query, gallery, _, _ = random_vector_instance(rng)
            params = VectorCRParams(0.1, 0.1)
            sol = solve_vector_hull(query, gallery, params)
            assert stationarity_residual(query, gallery, sol, params) <= 1e-8

    def test_matches_oracle_objective(self, rng):
        for lam in (1e-3, 1e-1, 1.0):
            query, gallery, Y, X = random_vector_instance(rng)
            params = VectorCRParams(lam, lam)
            sol = solve_vector_hull(query, gallery, params)
            _, _, obj_ref = vector_oracle(Y, X, lam, lam)
            assert sol.diagnostics.objective == pytest.approx(obj_ref, rel=1e-6)

    def test_feasible_perturbations_never_beat_solution(self, rng):
        query, gallery, Y, X = random_vector_instance(rng, n_a=3)
        params = VectorCRParams(0.05, 0.05)
        sol = solve_vector_hull(query, gallery, params)
        base = sol.diagnostics.objective
        n_a, n_b = Y.shape[1], X.shape[1]
        for _ in range(1000):
            da = rng.standard_normal(n_a) * 0.01
            da -= da.mean()  # keeps sum(alpha) = 1
            db = rng.standard_normal(n_b) * 0.01
            perturbed = objective_vector(
                query, gallery, sol.alpha + da, sol.beta + db, params
            )
            assert base <= perturbed + 1e-9

    def test_scaling_covariance(self, rng):
        query, gallery, Y, X = random_vector_instance(rng)
        c = 7.3
        sol1 = solve_vector_hull(query, gallery, VectorCRParams(0.02, 0.05))
        scaled_query = FeatureSet(np.sqrt(c) * Y)
        scaled_gallery = concat_gallery(
            [
                (lab, FeatureSet(np.sqrt(c) * s.data))
                for lab, s in zip(gallery.labels, gallery.sets)
            ]
        )
        sol2 = solve_vector_hull(
            scaled_query, scaled_gallery, VectorCRParams(c * 0.02, c * 0.05)
        )
        assert sol2.alpha == pytest.approx(sol1.alpha, abs=1e-8)
        assert sol2.beta == pytest.approx(sol1.beta, abs=1e-8)

    def test_singular_system_raises(self):
        # lambda = 0 with duplicated columns makes A^T A + B singular
        col = np.array([[1.0], [2.0]])
        Y = FeatureSet(np.hstack([col, col]))
        gallery = concat_gallery([(0, FeatureSet(col))])
        with pytest.raises((SingularSystemError, DegenerateConstraintError)):
            solve_vector_hull(Y, gallery, VectorCRParams(0.0, 0.0))


class TestObjective:
    def test_zero_coefficients(self):
        Y, gallery = small_instance()
        assert objective_vector(Y, gallery, [0.0], [0.0, 0.0], VectorCRParams(1, 1)) == 0.0

    def test_identical_single_columns(self):
        col = np.array([[1.0], [1.0]])
        query = FeatureSet(col)
        gallery = concat_gallery([(0, FeatureSet(col))])
        val = objective_vector(query, gallery, [1.0], [1.0], VectorCRParams(1.0, 1.0))
        assert val == pytest.approx(2.0, abs=1e-15)

    def test_matches_independent_recomputation(self, rng):
        query, gallery, Y, X = random_vector_instance(rng)
        a = rng.standard_normal(Y.shape[1])
        b = rng.standard_normal(X.shape[1])
        lam1, lam2 = 0.3, 0.7
        ours = objective_vector(query, gallery, a, b, VectorCRParams(lam1, lam2))
        r = Y @ a - X @ b
        ref = float(r @ r) + lam1 * float(a @ a) + lam2 * float(b @ b)
        assert ours == pytest.approx(ref, rel=1e-12)
