"""Predictors: evaluation, model matrices, Hessians, expression grammar."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from efnlm import make_predictor
from efnlm.errors import DomainError, ParseError


def fd_gradient(pred, x, beta, step=1e-6):
    p = len(beta)
    cols = []
    for j in range(p):
        bp, bm = np.array(beta, float), np.array(beta, float)
        bp[j] += step
        bm[j] -= step
        cols.append((pred.eval_eta(x, bp) - pred.eval_eta(x, bm)) / (2 * step))
    return np.column_stack(cols)


def fd_hessian(pred, x, beta, step=1e-4):
    p = len(beta)
    n = x.shape[0]
    out = np.zeros((n, p, p))
    for r in range(p):
        for s in range(p):
            bpp = np.array(beta, float)
            bpm = np.array(beta, float)
            bmp = np.array(beta, float)
            bmm = np.array(beta, float)
            bpp[[r, s]] += step
            bmm[[r, s]] -= step
            bpm[r] += step
            bpm[s] -= step
            bmp[r] -= step
            bmp[s] += step
            if r == s:
                bpp = np.array(beta, float)
                bpp[r] += step
                bmm = np.array(beta, float)
                bmm[r] -= step
                out[:, r, s] = (
                    pred.eval_eta(x, bpp) - 2 * pred.eval_eta(x, beta) + pred.eval_eta(x, bmm)
                ) / step**2
            else:
                out[:, r, s] = (
                    pred.eval_eta(x, bpp)
                    - pred.eval_eta(x, bpm)
                    - pred.eval_eta(x, bmp)
                    + pred.eval_eta(x, bmm)
                ) / (4 * step**2)
    return out


class TestLinear:
    def test_eval(self):
        pred = make_predictor("linear", q=2)
        eta = pred.eval_eta(np.array([[1.0, 2.0]]), np.array([3.0, 4.0]))
        assert eta[0] == 11.0

    def test_model_matrix_is_x(self):
        pred = make_predictor("linear", q=3)
        x = np.random.default_rng(0).random((5, 3))
        for beta in (np.zeros(3), np.array([1.0, -2.0, 0.5])):
            assert np.array_equal(pred.model_matrix(x, beta), x)

    def test_hessians_zero(self):
        pred = make_predictor("linear", q=2)
        x = np.ones((4, 2))
        assert not pred.hessians(x, np.array([1.0, 2.0])).any()


class TestPowerPlusLinear:
    def test_eval_reference_point(self):
        pred = make_predictor("power_plus_linear")
        x = np.array([[1.0, 0.0]])
        eta = pred.eval_eta(x, np.array([0.5, 1.0, 2.0]))
        assert abs(eta[0] - 1.5) < 1e-14

    def test_identity_power(self):
        pred = make_predictor("power_plus_linear")
        x = np.array([[np.e, 0.0]])
        eta = pred.eval_eta(x, np.array([0.0, 1.0, 0.0]))
        assert abs(eta[0] - np.e) < 1e-14

    def test_model_matrix_row(self):
        pred = make_predictor("power_plus_linear")
        x = np.array([[np.e, 0.3]])
        row = pred.model_matrix(x, np.array([0.5, 1.0, 2.0]))[0]
        assert np.allclose(row, [1.0, np.e, 0.3])

    def test_hessian_structure(self):
        pred = make_predictor("power_plus_linear")
        x = np.array([[np.e, 0.3]])
        h = pred.hessians(x, np.array([0.5, 1.0, 2.0]))[0]
        expect = np.zeros((3, 3))
        expect[1, 1] = np.e  # (log e)^2 * e^1
        assert np.allclose(h, expect)

    def test_gradient_matches_finite_differences(self):
        pred = make_predictor("power_plus_linear")
        rng = np.random.default_rng(4)
        x = rng.random((6, 2)) + 0.1
        beta = np.array([0.5, 1.3, 2.0])
        assert np.allclose(pred.model_matrix(x, beta), fd_gradient(pred, x, beta), atol=1e-6)

    def test_hessian_matches_finite_differences(self):
        pred = make_predictor("power_plus_linear")
        rng = np.random.default_rng(5)
        x = rng.random((6, 2)) + 0.1
        beta = np.array([0.5, 1.3, 2.0])
        assert np.allclose(pred.hessians(x, beta), fd_hessian(pred, x, beta), atol=1e-4)

    def test_rejects_nonpositive_x1(self):
        pred = make_predictor("power_plus_linear")
        with pytest.raises(DomainError):
            pred.validate(np.array([[0.0, 1.0]]))


class TestExpression:
    def test_matches_power_plus_linear(self):
        expr = make_predictor(
            "expression",
            expression="b0 + x1^b1 + b2*x2",
            params=("b0", "b1", "b2"),
            covariates=("x1", "x2"),
        )
        builtin = make_predictor("power_plus_linear")
        rng = np.random.default_rng(6)
        x = rng.random((8, 2)) + 0.05
        beta = np.array([0.5, 1.0, 2.0])
        assert np.allclose(expr.eval_eta(x, beta), builtin.eval_eta(x, beta))
        assert np.allclose(expr.model_matrix(x, beta), builtin.model_matrix(x, beta))
        assert np.allclose(expr.hessians(x, beta), builtin.hessians(x, beta), atol=1e-12)

    def test_log_exp_division(self):
        pred = make_predictor(
            "expression",
            expression="log(x1) * exp(a) / (1 + b)",
            params=("a", "b"),
            covariates=("x1",),
        )
        x = np.array([[2.0], [3.0]])
        beta = np.array([0.5, 1.0])
        expect = np.log(x[:, 0]) * np.exp(0.5) / 2.0
        assert np.allclose(pred.eval_eta(x, beta), expect)

    @settings(max_examples=25, deadline=None)
    @given(
        beta=st.tuples(
            st.floats(-1.5, 1.5), st.floats(0.2, 2.0), st.floats(-1.5, 1.5)
        )
    )
    def test_derivatives_property(self, beta):
        pred = make_predictor(
            "expression",
            expression="b0*exp(b1*x1) + b2*x1*x2",
            params=("b0", "b1", "b2"),
            covariates=("x1", "x2"),
        )
        x = np.random.default_rng(9).random((5, 2)) + 0.1
        beta = np.array(beta)
        assert np.allclose(
            pred.model_matrix(x, beta), fd_gradient(pred, x, beta), atol=1e-5
        )
        assert np.allclose(pred.hessians(x, beta), fd_hessian(pred, x, beta), atol=1e-3)

    def test_unknown_name_rejected(self):
        with pytest.raises(ParseError):
            make_predictor(
                "expression", expression="a + zz", params=("a",), covariates=("x1",)
            )

    def test_disallowed_syntax_rejected(self):
        with pytest.raises(ParseError):
            make_predictor(
                "expression",
                expression="__import__('os')",
                params=("a",),
                covariates=("x1",),
            )

    def test_division_by_zero(self):
        pred = make_predictor(
            "expression", expression="x1 / a", params=("a",), covariates=("x1",)
        )
        with pytest.raises(DomainError):
            pred.eval_eta(np.array([[1.0]]), np.array([0.0]))


def test_unknown_kind():
    with pytest.raises(DomainError):
        make_predictor("quadratic")
