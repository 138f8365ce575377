"""Tests for the spectral preconditioner and its induced norms."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from pagd.grid import GridFunction, GridMismatch, SpectralGrid, inner_l2n, norm_l2n
from pagd.preconditioner import (
    IdentityPreconditioner,
    InvalidShift,
    NegativeQuadraticForm,
    SpectralPreconditioner,
    inner_L,
    norm_L,
    norm_Linv,
)


def random_field(grid, seed):
    rng = np.random.default_rng(seed)
    return GridFunction(grid, rng.standard_normal((grid.n, grid.n)))


class TestApply:
    def test_constant(self):
        grid = SpectralGrid(8)
        P = SpectralPreconditioner(grid, alpha=0.5, nu=0.9)
        out = P.apply(GridFunction.constant(grid, 2.0))
        assert_allclose(out.values, 0.9 * 2.0, atol=1e-13)

    def test_cosine_eigenfunction(self):
        grid = SpectralGrid(16)
        P = SpectralPreconditioner(grid, alpha=1.0, nu=1.2)
        v = GridFunction.sample(grid, lambda X, Y: np.cos(2 * np.pi * X))
        factor = 4 * np.pi**2 + 1.2
        assert np.max(np.abs(P.apply(v).values - factor * v.values)) <= 1e-12 * factor

    def test_identity_variant(self):
        v = random_field(SpectralGrid(6), 0)
        ident = IdentityPreconditioner()
        assert ident.apply(v) is v
        assert ident.solve(v) is v

    def test_grid_mismatch(self):
        P = SpectralPreconditioner(SpectralGrid(8), alpha=0.5, nu=1.0)
        with pytest.raises(GridMismatch):
            P.apply(GridFunction.zeros(SpectralGrid(4)))


class TestSolve:
    def test_constant(self):
        grid = SpectralGrid(8)
        P = SpectralPreconditioner(grid, alpha=0.5, nu=0.9)
        out = P.solve(GridFunction.constant(grid, 2.0))
        assert_allclose(out.values, 2.0 / 0.9, rtol=1e-13)

    def test_roundtrip(self):
        grid = SpectralGrid(8)
        P = SpectralPreconditioner(grid, alpha=0.5, nu=1.2)
        v = random_field(grid, 1)
        back = P.solve(P.apply(v))
        scale = np.max(np.abs(v.values))
        assert np.max(np.abs(back.values - v.values)) <= 1e-12 * scale

    def test_cosine_division(self):
        grid = SpectralGrid(16)
        P = SpectralPreconditioner(grid, alpha=0.5, nu=1.0)
        v = GridFunction.sample(grid, lambda X, Y: np.cos(4 * np.pi * Y))
        expected = v.values / ((16 * np.pi**2) ** 0.5 + 1.0)
        assert np.max(np.abs(P.solve(v).values - expected)) <= 1e-12 * np.max(np.abs(expected))

    def test_invalid_shift(self):
        grid = SpectralGrid(8)
        with pytest.raises(InvalidShift):
            SpectralPreconditioner(grid, alpha=0.5, nu=0.0)
        with pytest.raises(InvalidShift):
            SpectralPreconditioner(grid, alpha=0.5, nu=-1.0)

    def test_linearity(self):
        grid = SpectralGrid(7)
        P = SpectralPreconditioner(grid, alpha=0.8, nu=0.7)
        r, q = random_field(grid, 2), random_field(grid, 3)
        a, b = 1.7, -0.4
        lhs = P.solve(a * r + b * q)
        rhs = a * P.solve(r) + b * P.solve(q)
        assert np.max(np.abs(lhs.values - rhs.values)) < 1e-12


class TestInducedNorms:
    def test_identity_reduces_to_l2(self):
        v = random_field(SpectralGrid(6), 4)
        w = random_field(SpectralGrid(6), 5)
        ident = IdentityPreconditioner()
        assert_allclose(inner_L(ident, v, w), inner_l2n(v, w), rtol=1e-14)
        assert_allclose(norm_Linv(ident, v), norm_l2n(v), rtol=1e-14)

    def test_cosine_value(self):
        grid = SpectralGrid(16)
        P = SpectralPreconditioner(grid, alpha=1.0, nu=1.2)
        v = GridFunction.sample(grid, lambda X, Y: np.cos(2 * np.pi * X))
        assert_allclose(inner_L(P, v, v), (4 * np.pi**2 + 1.2) / 2.0, rtol=1e-12)

    def test_symmetry(self):
        grid = SpectralGrid(9)
        P = SpectralPreconditioner(grid, alpha=0.6, nu=0.8)
        v, w = random_field(grid, 6), random_field(grid, 7)
        a, b = inner_L(P, v, w), inner_L(P, w, v)
        assert abs(a - b) <= 1e-12 * max(abs(a), 1.0)

    def test_coercivity_spot_check(self):
        grid = SpectralGrid(9)
        P = SpectralPreconditioner(grid, alpha=0.6, nu=0.8)
        for seed in range(5):
            v = random_field(grid, 10 + seed)
            assert inner_L(P, v, v) > 0

    def test_lower_bound_by_shift(self):
        grid = SpectralGrid(8)
        P = SpectralPreconditioner(grid, alpha=0.4, nu=1.5)
        for seed in range(4):
            v = random_field(grid, 20 + seed)
            assert norm_L(P, v) >= np.sqrt(1.5) * norm_l2n(v) * (1 - 1e-12)

    def test_dual_norm_paths_agree(self):
        grid = SpectralGrid(8)
        P = SpectralPreconditioner(grid, alpha=0.5, nu=1.1)
        r = random_field(grid, 30)
        assert_allclose(norm_Linv(P, r), norm_L(P, P.solve(r)), rtol=1e-12)

    def test_apply_solve_norm_identity(self):
        # ||apply(v)||_Linv = ||v||_L
        grid = SpectralGrid(8)
        P = SpectralPreconditioner(grid, alpha=0.9, nu=0.6)
        v = random_field(grid, 31)
        assert_allclose(norm_Linv(P, P.apply(v)), norm_L(P, v), rtol=1e-12)

    def test_cosine_dual_value(self):
        grid = SpectralGrid(16)
        P = SpectralPreconditioner(grid, alpha=1.0, nu=1.0)
        r = GridFunction.sample(grid, lambda X, Y: np.cos(2 * np.pi * X))
        expected = 1.0 / np.sqrt(2.0 * (4 * np.pi**2 + 1.0))
        assert_allclose(norm_Linv(P, r), expected, rtol=1e-12)

    def test_duality_sandwich(self):
        grid = SpectralGrid(8)
        P = SpectralPreconditioner(grid, alpha=0.5, nu=1.2)
        for seed in range(5):
            r = random_field(grid, 40 + seed)
            v = random_field(grid, 50 + seed)
            assert inner_l2n(r, v) <= norm_Linv(P, r) * norm_L(P, v) + 1e-10

    def test_negative_form_detected(self):
        class BrokenPreconditioner:
            def apply(self, v):
                return v

            def solve(self, r):
                return -1.0 * r

        r = random_field(SpectralGrid(6), 60)
        with pytest.raises(NegativeQuadraticForm):
            norm_Linv(BrokenPreconditioner(), r)

    def test_multiplier_positivity(self):
        grid = SpectralGrid(8)
        P = SpectralPreconditioner(grid, alpha=2.0, nu=0.3)
        assert np.min(P.multiplier) >= 0.3
