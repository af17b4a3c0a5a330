import numpy as np

from tsnkit.newton import DEGENERATE, NO_CONVERGE, OK, damped_newton


def test_batched_quadratic_roots():
    targets = np.array([2.0, 9.0, 0.25])

    def residual(x, rows):
        return x**2 - targets[rows][:, None], np.ones(len(rows), bool)

    res = damped_newton(residual, np.ones((3, 1)), tol=1e-12)
    assert np.all(res.converged)
    np.testing.assert_allclose(res.x[:, 0], np.sqrt(targets), rtol=1e-10)


def test_two_dimensional_system():
    def residual(x, rows):
        a, b = x[:, 0], x[:, 1]
        return np.column_stack([a * a + b * b - 4.0, a - b]), np.ones(len(rows), bool)

    res = damped_newton(residual, np.array([[1.0, 0.5]]), tol=1e-12)
    assert res.status[0] == OK
    np.testing.assert_allclose(res.x[0], [np.sqrt(2), np.sqrt(2)], rtol=1e-10)


def test_status_codes():
    def residual(x, rows):
        valid = rows != 0
        # row 1 has no real root: x^2 + 1 = 0
        r = np.where(rows[:, None] == 1, x**2 + 1.0, x - 3.0)
        return r, valid

    res = damped_newton(residual, np.ones((3, 1)), tol=1e-10, max_iter=50)
    assert res.status[0] == DEGENERATE
    assert res.status[1] == NO_CONVERGE
    assert res.status[2] == OK
