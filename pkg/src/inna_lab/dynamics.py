"""DIN field and integrator, the INNA iteration, a gradient-descent baseline and
the discrete Lyapunov energy.

State arrays may carry leading batch axes: ``theta`` and ``psi`` of shape
``(..., P)`` with ``alpha``/``beta``/``gamma`` scalars or arrays broadcastable
against ``(..., 1)``. The per-run drivers (``inna_run`` etc.) and the batched
ones used by the harness share the same update arithmetic, so a run computed
inside a batch is bitwise identical to the same run computed alone.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .landscape import Landscape
from .spectrum import HyperParams, gamma_convergence_bound

DEFAULT_GRAD_TOL = 1e-8
DEFAULT_MAX_ITER = 10**6
DIVERGENCE_NORM = 1e8
DEFAULT_ALPHA_CAP = 1e3


class StepSizeWarning(UserWarning):
    """Step-size outside the range covered by the convergence guarantee."""


class Termination(str, enum.Enum):
    GradTol = "GradTol"
    MaxIter = "MaxIter"
    Diverged = "Diverged"


@dataclass(frozen=True)
class PhaseState:
    theta: np.ndarray
    psi: np.ndarray

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float)
        psi = np.asarray(self.psi, dtype=float)
        if theta.shape != psi.shape:
            raise ValueError(f"theta and psi shapes differ: {theta.shape} vs {psi.shape}")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "psi", psi)

    @classmethod
    def auto(cls, theta0, alpha: float, beta: float) -> "PhaseState":
        """Start with ``psi0 = (1 - alpha*beta) theta0`` (zero coupling residual)."""
        theta0 = np.asarray(theta0, dtype=float)
        return cls(theta0, (1.0 - alpha * beta) * theta0)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.theta, self.psi], axis=-1)

    @classmethod
    def from_vector(cls, v) -> "PhaseState":
        v = np.asarray(v, dtype=float)
        P = v.shape[-1] // 2
        return cls(v[..., :P], v[..., P:])


@dataclass(frozen=True)
class StationarityResidual:
    grad_norm: float
    coupling_residual: float

    def within(self, tol: float) -> bool:
        return self.grad_norm <= tol and self.coupling_residual <= tol


@dataclass(frozen=True)
class Trajectory:
    """Recorded iterates. Row ``k`` of each array belongs to iterate ``k``."""

    thetas: np.ndarray
    psis: np.ndarray
    losses: np.ndarray
    grad_norms: np.ndarray
    lyapunov: np.ndarray
    coupling_residuals: np.ndarray
    terminated_by: Termination

    @property
    def step_count(self) -> int:
        return len(self.losses) - 1

    @property
    def states(self) -> list:
        return [PhaseState(t, p) for t, p in zip(self.thetas, self.psis)]

    @property
    def final(self) -> PhaseState:
        return PhaseState(self.thetas[-1], self.psis[-1])

    def __len__(self) -> int:
        return len(self.losses)


# -- fields and single steps -------------------------------------------------


def _damping_terms(theta, psi, alpha, beta):
    return -(alpha - 1.0 / beta) * theta - psi / beta


def _inna_update(theta, psi, grad, alpha, beta, gamma):
    c = _damping_terms(theta, psi, alpha, beta)
    return theta + gamma * (c - beta * grad), psi + gamma * c


def din_field(L: Landscape, s: PhaseState, alpha: float, beta: float) -> PhaseState:
    """Velocity ``(d theta/dt, d psi/dt)`` of the first-order DIN system."""
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    c = _damping_terms(s.theta, s.psi, alpha, beta)
    return PhaseState(c - beta * L.gradient(s.theta), c)


def inna_step(L: Landscape, s: PhaseState, hp: HyperParams) -> PhaseState:
    """One INNA iteration (explicit Euler on the DIN field); one gradient call."""
    theta, psi = _inna_update(s.theta, s.psi, L.gradient(s.theta), hp.alpha, hp.beta, hp.require_gamma())
    return PhaseState(theta, psi)


def coupling_residual(theta, psi, alpha, beta):
    return np.linalg.norm(psi - (1.0 - alpha * beta) * theta, axis=-1)


def stationarity_residual(L: Landscape, s: PhaseState, alpha: float, beta: float) -> StationarityResidual:
    return StationarityResidual(
        float(np.linalg.norm(L.gradient(s.theta))),
        float(coupling_residual(s.theta, s.psi, alpha, beta)),
    )


def _energy(value, theta, psi, alpha, beta, gamma):
    mu = 1.0 + alpha * beta - gamma * alpha
    v = (alpha - 1.0 / beta) * theta + psi / beta
    return mu * value + 0.5 * np.sum(v * v, axis=-1)


def lyapunov_energy(L: Landscape, s: PhaseState, hp: HyperParams) -> float:
    """``(1 + alpha beta - gamma alpha) J(theta) + |(alpha - 1/beta) theta + psi/beta|^2 / 2``."""
    return _energy(L.value(s.theta), s.theta, s.psi, hp.alpha, hp.beta, hp.require_gamma())


def lyapunov_constants(hp: HyperParams, L_grad: float) -> tuple:
    """Constants ``(C1, C2)`` of the summed energy-decrease inequality.

    Requires ``gamma`` below :func:`gamma_convergence_bound`.
    """
    gamma = hp.require_gamma()
    bound = gamma_convergence_bound(hp.alpha, hp.beta, L_grad)
    if gamma >= bound:
        raise ValueError(f"gamma = {gamma} violates the convergence bound {bound:.6g}")
    mu = 1.0 + hp.alpha * hp.beta - gamma * hp.alpha
    C1 = -(mu * L_grad / 2.0 + hp.alpha**2 / 2.0 - hp.alpha / gamma)
    C2 = -(gamma**2 / 2.0 - gamma * hp.beta)
    return C1, C2


def summed_decrease(traj: Trajectory) -> tuple:
    """``(sum |theta_{k+1} - theta_k|^2, sum_{k<K+1} |grad J(theta_k)|^2)`` over a trajectory."""
    dtheta = np.diff(traj.thetas, axis=0)
    return float(np.sum(dtheta * dtheta)), float(np.sum(traj.grad_norms[:-1] ** 2))


# -- drivers -----------------------------------------------------------------


def _diverged(theta) -> bool:
    return not np.all(np.isfinite(theta)) or float(np.linalg.norm(theta)) > DIVERGENCE_NORM


class _Recorder:
    def __init__(self):
        self.thetas, self.psis, self.losses, self.grads, self.lyap, self.coup = [], [], [], [], [], []

    def add(self, theta, psi, loss, gnorm, energy, coup):
        self.thetas.append(theta)
        self.psis.append(psi)
        self.losses.append(float(loss))
        self.grads.append(gnorm)
        self.lyap.append(float(energy))
        self.coup.append(float(coup))

    def finish(self, how: Termination) -> Trajectory:
        return Trajectory(
            thetas=np.array(self.thetas),
            psis=np.array(self.psis),
            losses=np.array(self.losses),
            grad_norms=np.array(self.grads),
            lyapunov=np.array(self.lyap),
            coupling_residuals=np.array(self.coup),
            terminated_by=how,
        )


def _check_gamma(L: Landscape, hp: HyperParams):
    if L.lipschitz_grad is None or hp.alpha <= 0:
        return
    bound = gamma_convergence_bound(hp.alpha, hp.beta, L.lipschitz_grad)
    if hp.require_gamma() >= bound:
        warnings.warn(
            f"gamma = {hp.gamma} is not below the convergence bound {bound:.6g} for L = {L.lipschitz_grad}",
            StepSizeWarning,
            stacklevel=3,
        )


def inna_run(
    L: Landscape,
    s0: PhaseState,
    hp: HyperParams,
    max_iter: int = DEFAULT_MAX_ITER,
    grad_tol: float = DEFAULT_GRAD_TOL,
) -> Trajectory:
    """Iterate INNA until ``|grad J| < grad_tol``, ``max_iter`` steps, or divergence.

    Emits :class:`StepSizeWarning` when ``gamma`` is not below the convergence
    bound for ``L.lipschitz_grad``.
    """
    _check_gamma(L, hp)
    return _run_inna(L, s0, hp.alpha, hp.beta, hp.require_gamma(), max_iter, grad_tol, alpha_at=None)


def inna_run_vanishing(
    L: Landscape,
    s0: PhaseState,
    beta: float,
    c: float,
    gamma: float,
    max_iter: int = DEFAULT_MAX_ITER,
    grad_tol: float = DEFAULT_GRAD_TOL,
    alpha_cap: float = DEFAULT_ALPHA_CAP,
) -> Trajectory:
    """INNA with viscous damping ``alpha_k = min(alpha_cap, c / t_k)``, ``t_k = (k+1) gamma``.

    The recorded energy uses the damping of the step that leaves each iterate.
    """
    if c <= 0 or alpha_cap <= 0:
        raise ValueError("c and alpha_cap must be positive")
    HyperParams(0.0, beta, gamma)  # validates beta and gamma
    return _run_inna(
        L, s0, None, beta, gamma, max_iter, grad_tol, alpha_at=lambda k: min(alpha_cap, c / ((k + 1) * gamma))
    )


def _run_inna(L, s0, alpha, beta, gamma, max_iter, grad_tol, alpha_at):
    rec = _Recorder()
    theta, psi = s0.theta.copy(), s0.psi.copy()
    k = 0
    while True:
        a = alpha if alpha_at is None else alpha_at(k)
        grad = L.gradient(theta)
        gnorm = float(np.linalg.norm(grad))
        value = L.value(theta)
        rec.add(theta, psi, value, gnorm, _energy(value, theta, psi, a, beta, gamma), coupling_residual(theta, psi, a, beta))
        if gnorm < grad_tol:
            return rec.finish(Termination.GradTol)
        if k >= max_iter:
            return rec.finish(Termination.MaxIter)
        theta, psi = _inna_update(theta, psi, grad, a, beta, gamma)
        if _diverged(theta) or not np.all(np.isfinite(psi)):
            return rec.finish(Termination.Diverged)
        k += 1


def gd_run(
    L: Landscape,
    theta0,
    gamma: float,
    max_iter: int = DEFAULT_MAX_ITER,
    grad_tol: float = DEFAULT_GRAD_TOL,
) -> Trajectory:
    """Plain gradient descent. ``psis`` mirror ``thetas``; ``lyapunov`` holds the losses."""
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    rec = _Recorder()
    theta = np.asarray(theta0, dtype=float).copy()
    k = 0
    while True:
        grad = L.gradient(theta)
        gnorm = float(np.linalg.norm(grad))
        value = L.value(theta)
        rec.add(theta, theta, value, gnorm, value, 0.0)
        if gnorm < grad_tol:
            return rec.finish(Termination.GradTol)
        if k >= max_iter:
            return rec.finish(Termination.MaxIter)
        theta = theta - gamma * grad
        if _diverged(theta):
            return rec.finish(Termination.Diverged)
        k += 1


def _rk4_step(L, y, alpha, beta, h):
    def f(v):
        return din_field(L, PhaseState.from_vector(v), alpha, beta).as_vector()

    k1 = f(y)
    k2 = f(y + 0.5 * h * k1)
    k3 = f(y + 0.5 * h * k2)
    k4 = f(y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def din_integrate(
    L: Landscape,
    s0: PhaseState,
    alpha: float,
    beta: float,
    h: float = 1e-3,
    t_end: float = 50.0,
    grad_tol: float = DEFAULT_GRAD_TOL,
) -> Trajectory:
    """Fixed-step classical Runge-Kutta 4 integration of the DIN field.

    Stops early once both stationarity residuals drop below ``grad_tol``; the
    ``lyapunov`` column holds the continuous-time energy
    ``(1 + alpha beta) J + |(alpha - 1/beta) theta + psi/beta|^2 / 2``.
    """
    if h <= 0 or t_end <= 0:
        raise ValueError("h and t_end must be positive")
    n_steps = int(round(t_end / h))
    rec = _Recorder()
    y = s0.as_vector().astype(float)
    P = s0.theta.shape[-1]
    k = 0
    while True:
        theta, psi = y[:P], y[P:]
        gnorm = float(np.linalg.norm(L.gradient(theta)))
        coup = float(coupling_residual(theta, psi, alpha, beta))
        value = L.value(theta)
        rec.add(theta, psi, value, gnorm, _energy(value, theta, psi, alpha, beta, 0.0), coup)
        if gnorm < grad_tol and coup < grad_tol:
            return rec.finish(Termination.GradTol)
        if k >= n_steps:
            return rec.finish(Termination.MaxIter)
        y = _rk4_step(L, y, alpha, beta, h)
        if _diverged(y[:P]) or not np.all(np.isfinite(y)):
            return rec.finish(Termination.Diverged)
        k += 1


# -- batched drivers ---------------------------------------------------------


@dataclass
class BatchResult:
    """Terminal data of a batch of independent runs.

    ``escape_iters[i]`` is the first iterate index whose distance from
    ``center`` exceeds ``escape_radius`` (``-1`` if never).
    """

    thetas: np.ndarray
    psis: np.ndarray
    iterations: np.ndarray
    terminated_by: list
    escape_iters: np.ndarray


def run_batch(
    L: Landscape,
    theta0: np.ndarray,
    psi0: Optional[np.ndarray],
    algorithm: str,
    alpha: float,
    beta: float,
    gamma: float,
    max_iter: int,
    grad_tol: float,
    escape_radius: float = math.inf,
    center=None,
) -> BatchResult:
    """Run INNA (``algorithm='inna'``) or gradient descent (``'gd'``) on each row of ``theta0``.

    Finished runs are frozen; the update applied to active rows is the same
    arithmetic as :func:`inna_step` / :func:`gd_run`.
    """
    theta = np.array(theta0, dtype=float)
    n, P = theta.shape
    psi = theta.copy() if psi0 is None else np.array(psi0, dtype=float)
    center = np.zeros(P) if center is None else np.asarray(center, dtype=float)
    iters = np.zeros(n, dtype=np.int64)
    status = np.full(n, "", dtype=object)
    active = np.ones(n, dtype=bool)
    escape = np.full(n, -1, dtype=np.int64)

    for k in range(max_iter + 1):
        if escape_radius < math.inf:
            d = theta - center
            newly = active & (escape < 0) & (np.sqrt(np.sum(d * d, axis=-1)) > escape_radius)
            escape[newly] = k
        grad = L.gradient(theta)
        if grad_tol > 0:
            done = active & (np.sqrt(np.sum(grad * grad, axis=-1)) < grad_tol)
            if done.any():
                status[done] = Termination.GradTol.value
                iters[done] = k
                active &= ~done
        if k == max_iter:
            status[active] = Termination.MaxIter.value
            iters[active] = k
            break
        if not active.any():
            break
        if algorithm == "inna":
            new_theta, new_psi = _inna_update(theta, psi, grad, alpha, beta, gamma)
        elif algorithm == "gd":
            new_theta = theta - gamma * grad
            new_psi = new_theta
        else:
            raise ValueError(f"unknown algorithm {algorithm!r}")
        bad = active & ~(np.sum(new_theta * new_theta, axis=-1) <= DIVERGENCE_NORM**2)
        if bad.any():
            status[bad] = Termination.Diverged.value
            iters[bad] = k
            active &= ~bad
        if active.all():
            theta, psi = new_theta, new_psi
        else:
            theta[active] = new_theta[active]
            psi[active] = new_psi[active]

    return BatchResult(theta, psi, iters, [Termination(s) for s in status], escape)
