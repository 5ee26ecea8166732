"""Loss landscapes: value/gradient/Hessian access, finite-difference oracles and
critical-point classification.

Built-in landscapes evaluate ``value`` and ``gradient`` over the last axis, so a
batch of points with shape ``(n, P)`` is accepted as well as a single point.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

DEFAULT_ZERO_TOL = 1e-7
DEFAULT_CRIT_TOL = 1e-6
DEFAULT_FD_STEP = 1e-5

# Box on which the double-well's declared gradient Lipschitz constant holds.
DOUBLEWELL_BOX = (-3.0, 3.0)
DOUBLEWELL_LIPSCHITZ = 100.0


class NotCriticalError(ValueError):
    """Raised when a point handed to :func:`classify_critical` has a large gradient."""

    def __init__(self, grad_norm: float, tol: float):
        super().__init__(f"not a critical point: |grad| = {grad_norm:.3e} > tol = {tol:.1e}")
        self.grad_norm = grad_norm
        self.tol = tol


class Landscape:
    """A twice-differentiable loss ``J: R^P -> R``.

    Parameters
    ----------
    dimension : int
        Number of parameters ``P``.
    value, gradient : callable
        ``value(theta) -> float`` and ``gradient(theta) -> (P,) array``.
    hessian : callable, optional
        ``hessian(theta) -> (P, P) array``. When omitted, a central
        finite-difference Hessian of ``value`` is used with step
        ``1e-5 * max(1, |theta|)``.
    lipschitz_grad : float, optional
        Lipschitz constant of the gradient (possibly only valid on ``box``).
    box : (float, float), optional
        Coordinate-wise box on which ``lipschitz_grad`` is valid; ``None``
        means the bound is global.
    critical_points : sequence of (label, point), optional
        Known critical points, used by the experiment harness.
    """

    def __init__(
        self,
        dimension: int,
        value: Callable,
        gradient: Callable,
        hessian: Optional[Callable] = None,
        lipschitz_grad: Optional[float] = None,
        name: str = "custom",
        box: Optional[tuple] = None,
        critical_points: Sequence = (),
    ):
        if dimension < 1:
            raise ValueError(f"dimension must be positive, got {dimension}")
        if lipschitz_grad is not None and lipschitz_grad <= 0:
            raise ValueError(f"lipschitz_grad must be positive, got {lipschitz_grad}")
        self.dimension = int(dimension)
        self._value = value
        self._gradient = gradient
        self._hessian = hessian
        self.lipschitz_grad = lipschitz_grad
        self.name = name
        self.box = box
        self.critical_points = tuple((label, np.asarray(p, dtype=float)) for label, p in critical_points)

    @property
    def has_analytic_hessian(self) -> bool:
        return self._hessian is not None

    def value(self, theta):
        return self._value(np.asarray(theta, dtype=float))

    def gradient(self, theta) -> np.ndarray:
        return np.asarray(self._gradient(np.asarray(theta, dtype=float)), dtype=float)

    def hessian(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if self._hessian is not None:
            return np.asarray(self._hessian(theta), dtype=float)
        h = DEFAULT_FD_STEP * max(1.0, float(np.linalg.norm(theta)))
        return fd_hessian(self, theta, h)

    def __repr__(self) -> str:
        return f"Landscape(name={self.name!r}, dimension={self.dimension}, lipschitz_grad={self.lipschitz_grad})"


# -- built-ins -------------------------------------------------------------


def _quad2() -> Landscape:
    return Landscape(
        2,
        value=lambda t: t[..., 0] ** 2 + 2.0 * t[..., 1] ** 2,
        gradient=lambda t: np.stack([2.0 * t[..., 0], 4.0 * t[..., 1]], axis=-1),
        hessian=lambda t: np.diag([2.0, 4.0]),
        lipschitz_grad=4.0,
        name="quad2",
        critical_points=[("origin", (0.0, 0.0))],
    )


def _doublewell() -> Landscape:
    r2 = math.sqrt(2.0)
    return Landscape(
        2,
        value=lambda t: t[..., 0] ** 4 - 4.0 * t[..., 0] ** 2 + t[..., 1] ** 2,
        gradient=lambda t: np.stack([4.0 * t[..., 0] ** 3 - 8.0 * t[..., 0], 2.0 * t[..., 1]], axis=-1),
        hessian=lambda t: np.diag([12.0 * t[0] ** 2 - 8.0, 2.0]),
        # max(|12 x^2 - 8|, 2) over |x| <= 3
        lipschitz_grad=DOUBLEWELL_LIPSCHITZ,
        name="doublewell",
        box=DOUBLEWELL_BOX,
        critical_points=[("minus_sqrt2", (-r2, 0.0)), ("plus_sqrt2", (r2, 0.0)), ("saddle", (0.0, 0.0))],
    )


def _fig1_min() -> Landscape:
    return Landscape(
        2,
        value=lambda t: 0.5 * t[..., 0] ** 2 + 0.5 * t[..., 1] ** 2 + t[..., 0] * t[..., 1],
        gradient=lambda t: np.stack([t[..., 0] + t[..., 1], t[..., 0] + t[..., 1]], axis=-1),
        hessian=lambda t: np.array([[1.0, 1.0], [1.0, 1.0]]),
        lipschitz_grad=2.0,
        name="fig1_min",
        critical_points=[("origin", (0.0, 0.0))],
    )


def _fig1_monkey() -> Landscape:
    return Landscape(
        2,
        value=lambda t: t[..., 0] ** 3 + t[..., 1] ** 2,
        gradient=lambda t: np.stack([3.0 * t[..., 0] ** 2, 2.0 * t[..., 1]], axis=-1),
        hessian=lambda t: np.diag([6.0 * t[0], 2.0]),
        # max(6|x|, 2) over |x| <= 3
        lipschitz_grad=18.0,
        name="fig1_monkey",
        box=(-3.0, 3.0),
        critical_points=[("origin", (0.0, 0.0))],
    )


def diag_quadratic(eigenvalues: Sequence[float]) -> Landscape:
    """``0.5 * sum(lam_i * theta_i**2)``."""
    lam = np.asarray(eigenvalues, dtype=float)
    if lam.ndim != 1 or lam.size == 0:
        raise ValueError("diag_quadratic needs a non-empty 1-D list of eigenvalues")
    P = lam.size
    lip = float(np.max(np.abs(lam)))
    return Landscape(
        P,
        value=lambda t: 0.5 * np.sum(lam * t**2, axis=-1),
        gradient=lambda t: lam * t,
        hessian=lambda t: np.diag(lam),
        lipschitz_grad=lip if lip > 0 else None,
        name="diag_quadratic",
        critical_points=[("origin", np.zeros(P))],
    )


_BUILTINS = {
    "quad2": _quad2,
    "doublewell": _doublewell,
    "fig1_min": _fig1_min,
    "fig1_monkey": _fig1_monkey,
}

BUILTIN_NAMES = tuple(_BUILTINS) + ("diag_quadratic",)


def builtin(name: str, eigenvalues: Optional[Sequence[float]] = None) -> Landscape:
    """Return one of the built-in landscapes by name.

    ``diag_quadratic`` additionally requires ``eigenvalues``.
    """
    if name == "diag_quadratic":
        if eigenvalues is None:
            raise ValueError("diag_quadratic requires eigenvalues")
        return diag_quadratic(eigenvalues)
    try:
        return _BUILTINS[name]()
    except KeyError:
        raise ValueError(f"unknown landscape {name!r}; expected one of {', '.join(BUILTIN_NAMES)}") from None


# -- finite differences ----------------------------------------------------


def fd_gradient(L: Landscape, theta, h: float = DEFAULT_FD_STEP) -> np.ndarray:
    """Central-difference gradient of ``L.value``."""
    if h <= 0:
        raise ValueError(f"step must be positive, got {h}")
    theta = np.asarray(theta, dtype=float)
    g = np.empty(theta.size)
    for i in range(theta.size):
        e = np.zeros(theta.size)
        e[i] = h
        g[i] = (L.value(theta + e) - L.value(theta - e)) / (2.0 * h)
    return g


def fd_hessian(L: Landscape, theta, h: float = DEFAULT_FD_STEP) -> np.ndarray:
    """Central second differences of ``L.value``, symmetrized."""
    if h <= 0:
        raise ValueError(f"step must be positive, got {h}")
    theta = np.asarray(theta, dtype=float)
    P = theta.size
    f0 = L.value(theta)
    H = np.empty((P, P))
    E = np.eye(P) * h
    for i in range(P):
        H[i, i] = (L.value(theta + E[i]) - 2.0 * f0 + L.value(theta - E[i])) / h**2
        for j in range(i + 1, P):
            fpp = L.value(theta + E[i] + E[j])
            fpm = L.value(theta + E[i] - E[j])
            fmp = L.value(theta - E[i] + E[j])
            fmm = L.value(theta - E[i] - E[j])
            H[i, j] = H[j, i] = (fpp - fpm - fmp + fmm) / (4.0 * h**2)
    return 0.5 * (H + H.T)


# -- critical points -------------------------------------------------------


class CriticalLabel(str, enum.Enum):
    LocalMin = "LocalMin"
    StrictSaddle = "StrictSaddle"
    NonStrictSaddle = "NonStrictSaddle"


@dataclass(frozen=True)
class CriticalPointClass:
    label: CriticalLabel
    eigenvalues: tuple
    zero_tolerance: float


def label_from_eigenvalues(eigenvalues, zero_tol: float = DEFAULT_ZERO_TOL) -> CriticalLabel:
    lam_min = float(np.min(eigenvalues))
    if lam_min > zero_tol:
        return CriticalLabel.LocalMin
    if lam_min < -zero_tol:
        return CriticalLabel.StrictSaddle
    return CriticalLabel.NonStrictSaddle


def classify_critical(
    L: Landscape,
    theta,
    zero_tol: float = DEFAULT_ZERO_TOL,
    crit_tol: float = DEFAULT_CRIT_TOL,
) -> CriticalPointClass:
    """Classify a critical point from the signs of its Hessian eigenvalues.

    Raises :class:`NotCriticalError` when ``|grad J(theta)| > crit_tol``.
    """
    theta = np.asarray(theta, dtype=float)
    gnorm = float(np.linalg.norm(L.gradient(theta)))
    if gnorm > crit_tol:
        raise NotCriticalError(gnorm, crit_tol)
    eig = np.linalg.eigvalsh(L.hessian(theta))
    return CriticalPointClass(
        label=label_from_eigenvalues(eig, zero_tol),
        eigenvalues=tuple(float(x) for x in np.sort(eig)),
        zero_tolerance=zero_tol,
    )
