import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from inna_lab.landscape import (
    BUILTIN_NAMES,
    CriticalLabel,
    Landscape,
    NotCriticalError,
    builtin,
    classify_critical,
    fd_gradient,
    fd_hessian,
    label_from_eigenvalues,
)

R2 = math.sqrt(2.0)


def test_quad2_hessian_is_constant():
    L = builtin("quad2")
    for t in ([0, 0], [1.3, -7.0], [100.0, 3.0]):
        np.testing.assert_array_equal(L.hessian(t), np.diag([2.0, 4.0]))


def test_doublewell_values():
    L = builtin("doublewell")
    np.testing.assert_array_equal(L.gradient([0.0, 0.0]), [0.0, 0.0])
    np.testing.assert_allclose(L.hessian([R2, 0.0]), np.diag([16.0, 2.0]), atol=1e-12)
    assert L.lipschitz_grad == 100.0 and L.box == (-3.0, 3.0)


def test_builtins_vectorize_over_leading_axes():
    rng = np.random.default_rng(0)
    for name in ("quad2", "doublewell", "fig1_min", "fig1_monkey"):
        L = builtin(name)
        pts = rng.normal(size=(5, 2))
        vals = L.value(pts)
        grads = L.gradient(pts)
        for i in range(5):
            assert vals[i] == L.value(pts[i])
            np.testing.assert_array_equal(grads[i], L.gradient(pts[i]))


def test_unknown_builtin():
    with pytest.raises(ValueError, match="unknown"):
        builtin("rosenbrock")
    assert "diag_quadratic" in BUILTIN_NAMES


def test_diag_quadratic():
    L = builtin("diag_quadratic", [3.0, -1.0])
    np.testing.assert_allclose(L.gradient([1.0, 2.0]), [3.0, -2.0])
    assert L.lipschitz_grad == 3.0
    with pytest.raises(ValueError):
        builtin("diag_quadratic")


@pytest.mark.parametrize(
    "name, theta, expected",
    [("quad2", (1.0, 1.0), (2.0, 4.0)), ("doublewell", (1.0, 0.0), (-4.0, 0.0))],
)
def test_fd_gradient_examples(name, theta, expected):
    np.testing.assert_allclose(fd_gradient(builtin(name), theta, 1e-5), expected, atol=1e-6)


def test_fd_gradient_vanishes_at_critical_points():
    for name in ("quad2", "doublewell", "fig1_min", "fig1_monkey"):
        L = builtin(name)
        for _, p in L.critical_points:
            assert np.max(np.abs(fd_gradient(L, p))) < 1e-6


@pytest.mark.parametrize(
    "name, expected",
    [("quad2", [[2, 0], [0, 4]]), ("fig1_min", [[1, 1], [1, 1]]), ("fig1_monkey", [[0, 0], [0, 2]])],
)
def test_fd_hessian_examples(name, expected):
    np.testing.assert_allclose(fd_hessian(builtin(name), (0.0, 0.0)), expected, atol=1e-4)


def test_fd_rejects_bad_step():
    with pytest.raises(ValueError):
        fd_gradient(builtin("quad2"), (0, 0), 0.0)
    with pytest.raises(ValueError):
        fd_hessian(builtin("quad2"), (0, 0), -1.0)


def test_missing_hessian_falls_back_to_finite_differences():
    L = Landscape(2, value=lambda t: t[0] ** 2 * t[1], gradient=lambda t: np.array([2 * t[0] * t[1], t[0] ** 2]))
    assert not L.has_analytic_hessian
    np.testing.assert_allclose(L.hessian([1.0, 2.0]), [[4.0, 2.0], [2.0, 0.0]], atol=1e-4)


@pytest.mark.parametrize(
    "name, point, label, eigs",
    [
        ("doublewell", (0.0, 0.0), CriticalLabel.StrictSaddle, (-8.0, 2.0)),
        ("quad2", (0.0, 0.0), CriticalLabel.LocalMin, (2.0, 4.0)),
        ("fig1_monkey", (0.0, 0.0), CriticalLabel.NonStrictSaddle, (0.0, 2.0)),
        ("doublewell", (R2, 0.0), CriticalLabel.LocalMin, (2.0, 16.0)),
    ],
)
def test_classify_critical(name, point, label, eigs):
    c = classify_critical(builtin(name), point, crit_tol=1e-8)
    assert c.label is label
    np.testing.assert_allclose(c.eigenvalues, eigs, atol=1e-12)


def test_classify_rejects_non_critical():
    with pytest.raises(NotCriticalError) as exc:
        classify_critical(builtin("quad2"), (1.0, 1.0))
    assert exc.value.grad_norm == pytest.approx(math.sqrt(20.0))


@given(st.lists(st.floats(-10, 10), min_size=1, max_size=6), st.randoms(use_true_random=False))
def test_label_invariant_under_permutation(eigs, rnd):
    H = np.diag(eigs)
    perm = list(range(len(eigs)))
    rnd.shuffle(perm)
    Pm = np.eye(len(eigs))[perm]
    a = label_from_eigenvalues(np.linalg.eigvalsh(H))
    b = label_from_eigenvalues(np.linalg.eigvalsh(Pm @ H @ Pm.T))
    assert a is b


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=6))
def test_label_rules(eigs):
    lab = label_from_eigenvalues(eigs, 1e-7)
    m = min(eigs)
    if m > 1e-7:
        assert lab is CriticalLabel.LocalMin
    elif m < -1e-7:
        assert lab is CriticalLabel.StrictSaddle
    else:
        assert lab is CriticalLabel.NonStrictSaddle


def test_doublewell_critical_points_by_grid_scan():
    L = builtin("doublewell")
    x = np.linspace(-3.0, 3.0, 600_001)
    g = L.gradient(np.stack([x, np.zeros_like(x)], axis=-1))[:, 0]
    s = np.sign(g)
    flips = np.flatnonzero(s[1:] * s[:-1] < 0)
    roots = sorted(set(np.round(x[flips], 4)) | set(np.round(x[s == 0], 4)))
    known = sorted(round(float(p[0]), 4) for _, p in L.critical_points)
    assert roots == known


def _quadratic(H):
    return Landscape(H.shape[0], value=lambda t: 0.5 * t @ H @ t, gradient=lambda t: H @ t, hessian=lambda t: H)


@given(st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_classify_critical_invariant_under_coordinate_permutation(P, seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(P, P))
    H = A + A.T
    Pm = np.eye(P)[rng.permutation(P)]
    a = classify_critical(_quadratic(H), np.zeros(P))
    b = classify_critical(_quadratic(Pm @ H @ Pm.T), np.zeros(P))
    assert a.label is b.label
    np.testing.assert_allclose(a.eigenvalues, b.eigenvalues, atol=1e-12)
