import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from specstop.errors import DegenerateOperatorError, InvalidArgument
from specstop.operators import (DenseOperator, deriv2_kernel, deriv2_problem, export_problem,
                                import_problem, make_deriv2, make_diagonal_problem, svd,
                                symmetrize)

GL_NODES, GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


def gl(f, a, b):
    """8-point Gauss-Legendre on [a, b]; f is vectorised."""
    x = 0.5 * (b - a) * GL_NODES + 0.5 * (a + b)
    return 0.5 * (b - a) * np.sum(GL_WEIGHTS * f(x))


def gl_split(f, a, b, cuts=()):
    pts = [a] + sorted(c for c in cuts if a < c < b) + [b]
    return sum(gl(f, lo, hi) for lo, hi in zip(pts, pts[1:]))


def exact_x(case):
    return {1: lambda t: t,
            2: np.exp,
            3: lambda t: np.where(t < 0.5, t, 1 - t)}[case]


def loglog_slope(values, lo, hi):
    j = np.arange(lo, hi + 1)
    return np.polyfit(np.log(j), np.log(values[lo - 1:hi]), 1)[0]


# ---------------------------------------------------------------- diagonal

def test_diagonal_power_law():
    p = make_diagonal_problem(3, 2.0, 1.0, [1, 1, 1])
    np.testing.assert_allclose(p.sigma, [1, 0.5, 1 / 3], rtol=1e-15)
    np.testing.assert_allclose(p.yhat, [1, 0.5, 1 / 3], rtol=1e-15)
    assert p.decay_q == 2.0


def test_diagonal_single_component():
    p = make_diagonal_problem(1, 7.0, 1.0, [2.0])
    assert p.sigma.tolist() == [1.0]
    assert p.yhat.tolist() == [2.0]


def test_diagonal_scaled():
    p = make_diagonal_problem(2, 4.0, 2.0, [0, 1])
    assert p.sigma.tolist() == [2.0, 0.5]
    assert p.yhat.tolist() == [0.0, 0.5]


@pytest.mark.parametrize("args", [(0, 2.0, 1.0), (3, 0.0, 1.0), (3, 2.0, -1.0)])
def test_diagonal_rejects_bad_arguments(args):
    m = max(args[0], 1)
    with pytest.raises(InvalidArgument):
        make_diagonal_problem(args[0], args[1], args[2], np.ones(m))


@settings(max_examples=50, deadline=None)
@given(m=st.integers(1, 300), q=st.floats(0.1, 8), scale=st.floats(0.1, 10))
def test_diagonal_normalised_powers(m, q, scale):
    p = make_diagonal_problem(m, q, scale, np.linspace(-1, 1, m))
    j = np.arange(1, m + 1)
    np.testing.assert_allclose(p.sigma * j ** (q / 2) / scale, 1.0, rtol=1e-13)
    assert np.array_equal(p.yhat, p.sigma * p.xhat)


# ---------------------------------------------------------------- deriv2

@pytest.mark.parametrize("m", [2, 5, 64])
def test_deriv2_symmetric(m):
    A, _, _ = make_deriv2(m)
    assert np.abs(A.entries - A.entries.T).max() <= 1e-12
    assert A.rows == A.cols == m
    assert A.h == 1 / m


def test_deriv2_entries_match_quadrature():
    m = 6
    A, _, _ = make_deriv2(m)
    h = 1 / m
    oracle = np.empty((m, m))
    for i in range(m):
        for j in range(m):
            a, b = j * h, (j + 1) * h

            def inner(svals):
                # kernel has a kink at t = s; split the inner integral there
                return np.array([gl_split(lambda t: deriv2_kernel(s, t), a, b, (s,))
                                 for s in svals])
            oracle[i, j] = gl(inner, i * h, (i + 1) * h) / h
    np.testing.assert_allclose(A.entries, oracle, atol=1e-15, rtol=1e-12)


def test_deriv2_rhs_matches_cell_quadrature():
    m = 8
    _, _, b = make_deriv2(m, 1)
    h = 1 / m
    oracle = [gl(lambda s: (s ** 3 - s) / 6, i * h, (i + 1) * h) / np.sqrt(h) for i in range(m)]
    np.testing.assert_allclose(b, oracle, atol=1e-8)


@pytest.mark.parametrize("case", [1, 2, 3])
@pytest.mark.parametrize("m", [7, 10])
def test_deriv2_cases_solve_integral_equation(case, m):
    # b_i must be the cell projection of int k(s,t) x(t) dt, and x_true the cell projection of x
    _, x_true, b = make_deriv2(m, case)
    h = 1 / m
    x = exact_x(case)

    def y(svals):
        return np.array([gl_split(lambda t: deriv2_kernel(s, t) * x(t), 0.0, 1.0, (s, 0.5))
                         for s in svals])

    xo = [gl_split(x, i * h, (i + 1) * h, (0.5,)) / np.sqrt(h) for i in range(m)]
    bo = [gl_split(y, i * h, (i + 1) * h, (0.5,)) / np.sqrt(h) for i in range(m)]
    np.testing.assert_allclose(x_true, xo, atol=1e-12)
    np.testing.assert_allclose(b, bo, atol=1e-12)


def test_deriv2_leading_singular_value():
    sigma, _, _ = svd(make_deriv2(100)[0])
    assert abs(sigma[0] - 1 / np.pi ** 2) <= 0.01 / np.pi ** 2


@pytest.mark.parametrize("m", [100, 200])
def test_deriv2_singular_value_decay(m):
    sigma, _, _ = svd(make_deriv2(m)[0])
    assert -2.2 <= loglog_slope(sigma, 5, m // 2) <= -1.8


def test_deriv2_rejects_small_m():
    with pytest.raises(InvalidArgument):
        make_deriv2(1)
    with pytest.raises(InvalidArgument):
        make_deriv2(10, case=4)


# ---------------------------------------------------------------- svd

def test_svd_diagonal():
    sigma, U, V = svd(DenseOperator(np.diag([3.0, 1.0]), h=0.5))
    np.testing.assert_allclose(sigma, [3, 1])
    np.testing.assert_allclose(np.abs(U), np.eye(2), atol=1e-15)
    np.testing.assert_allclose(V, np.eye(2), atol=1e-15)


def test_svd_sorts():
    P = np.array([[0.0, 2.0], [1.0, 0.0]])
    sigma, _, _ = svd(DenseOperator(P, h=0.5))
    np.testing.assert_allclose(sigma, [2, 1])


def test_svd_reconstructs_deriv2():
    A, _, _ = make_deriv2(50)
    sigma, U, V = svd(A)
    assert np.abs(U @ np.diag(sigma) @ V.T - A.entries).max() <= 1e-9
    assert np.all(np.diff(sigma) <= 0)
    assert np.abs(A.entries @ V - U * sigma).max() <= 1e-9 * sigma[0]
    assert np.abs(U.T @ U - np.eye(50)).max() <= 1e-9
    assert np.abs(V.T @ V - np.eye(50)).max() <= 1e-9


def test_svd_sign_convention():
    rng = np.random.default_rng(0)
    _, _, V = svd(DenseOperator(rng.standard_normal((12, 12)), h=1 / 12))
    for col in V.T:
        first = col[np.flatnonzero(np.abs(col) > 1e-12 * np.abs(col).max())[0]]
        assert first > 0


# ---------------------------------------------------------------- symmetrize

def test_symmetrize_squares_singular_values():
    A = DenseOperator(np.diag([1.0, 0.5]), h=0.5)
    p = symmetrize(A, [1.0, 1.0], [1.0, 0.5])
    np.testing.assert_allclose(p.sigma, [1, 0.25])
    np.testing.assert_allclose(p.yhat, [1, 0.25])


def test_symmetrize_rejects_rank_deficiency():
    A = DenseOperator(np.diag([1.0, 1e-16]), h=0.5)
    with pytest.raises(DegenerateOperatorError):
        symmetrize(A, [1.0, 1.0], [1.0, 0.0])


def test_symmetrized_deriv2_decay():
    p = deriv2_problem(100)
    slope = loglog_slope(p.sigma, 5, 50)
    assert -4.4 <= slope <= -3.6
    assert p.decay_q == 8.0


def test_symmetrized_projection_of_exact_data():
    p = deriv2_problem(100)
    np.testing.assert_allclose(p.factor.project(p.factor.b), p.yhat, atol=1e-8, rtol=0)
    # (A^T z, v_j) computed the long way
    z = np.linspace(-1, 1, 100)
    np.testing.assert_allclose(p.factor.project(z), p.factor.V.T @ (p.factor.A.entries.T @ z),
                               atol=1e-14)


def test_problem_csv_roundtrip(tmp_path):
    p = deriv2_problem(20)
    path = tmp_path / "problem.csv"
    export_problem(p, path)
    assert path.read_text().splitlines()[0] == "j,sigma,xhat,yhat"
    q = import_problem(path)
    assert np.array_equal(q.sigma, p.sigma)
    assert np.array_equal(q.xhat, p.xhat)
    assert np.array_equal(q.yhat, p.yhat)
