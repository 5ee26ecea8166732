"""Linear stability of the inertial Newton dynamics around stationary points.

After diagonalizing the Hessian, the Jacobian of the first-order field (and of
the one-step INNA map) splits into 2x2 blocks, one per Hessian eigenvalue
``lam``. Everything here works on those blocks in closed form.

Continuous block characteristic polynomial::

    X^2 + (alpha + beta*lam) X + lam

Discrete (INNA, step gamma)::

    X^2 - (2 - gamma*(alpha + beta*lam)) X + 1 - gamma*(alpha + beta*lam) + gamma^2*lam
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .landscape import DEFAULT_CRIT_TOL, Landscape

STABILITY_TOL = 1e-9


class RealRegimeError(ValueError):
    """The discriminant is non-negative, so there is no spiral frequency."""


@dataclass(frozen=True)
class HyperParams:
    """Damping pair ``(alpha, beta)`` and optional step-size ``gamma``."""

    alpha: float
    beta: float
    gamma: Optional[float] = None

    def __post_init__(self):
        if not (self.alpha >= 0 and math.isfinite(self.alpha)):
            raise ValueError(f"alpha must be non-negative, got {self.alpha}")
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.gamma is not None and not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise ValueError(f"gamma must be positive, got {self.gamma}")

    def require_gamma(self) -> float:
        if self.gamma is None:
            raise ValueError("a step-size gamma is required here")
        return self.gamma

    def with_gamma(self, gamma: float) -> "HyperParams":
        return HyperParams(self.alpha, self.beta, gamma)


class Regime(str, enum.Enum):
    RealNodes = "RealNodes"
    ComplexSpiral = "ComplexSpiral"


def _check_damping(alpha, beta):
    if alpha < 0:
        raise ValueError(f"alpha must be non-negative, got {alpha}")
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")


def discriminant(alpha: float, beta: float, lam: float) -> float:
    s = alpha + beta * lam
    return s * s - 4.0 * lam


# -- spiral interval -------------------------------------------------------


@dataclass(frozen=True)
class SpiralInterval:
    nonempty: bool
    lo: float = math.nan
    hi: float = math.nan

    def __contains__(self, lam) -> bool:
        return self.nonempty and self.lo <= lam <= self.hi

    def as_list(self):
        return [self.lo, self.hi] if self.nonempty else None


def spiral_interval(alpha: float, beta: float) -> SpiralInterval:
    """Hessian eigenvalues for which the continuous blocks have complex roots."""
    _check_damping(alpha, beta)
    ab = alpha * beta
    if ab > 1.0:
        return SpiralInterval(False)
    root = 2.0 * math.sqrt(1.0 - ab)
    hi = (2.0 - ab + root) / beta**2
    # lo * hi = alpha^2 / beta^2; avoids cancellation in (2 - ab - root) for small ab
    lo = alpha**2 / (beta**2 * hi)
    return SpiralInterval(True, lo, hi)


def discriminant_sign(alpha: float, beta: float, lam: float) -> tuple:
    """Return ``(delta, in_interval)``; ``delta <= 0`` iff ``in_interval``."""
    _check_damping(alpha, beta)
    return discriminant(alpha, beta, lam), lam in spiral_interval(alpha, beta)


# -- continuous blocks -----------------------------------------------------


@dataclass(frozen=True)
class BlockSpectrum:
    lam: float
    discriminant: float
    sigma_plus: complex
    sigma_minus: complex
    regime: Regime
    omega: float


def _real_quadratic_roots(b: float, c: float, disc: float) -> tuple:
    """Roots of ``X^2 + b X + c`` with ``disc = b^2 - 4c >= 0``, larger first."""
    sq = math.sqrt(disc)
    q = -0.5 * (b + math.copysign(sq, b))
    if q == 0.0:
        return 0.0, 0.0
    r1, r2 = q, c / q
    return (r1, r2) if r1 >= r2 else (r2, r1)


def din_block_eigs(alpha: float, beta: float, lam: float) -> BlockSpectrum:
    """Eigenvalues of the continuous 2x2 Jacobian block for Hessian eigenvalue ``lam``."""
    _check_damping(alpha, beta)
    s = alpha + beta * lam
    disc = s * s - 4.0 * lam
    if disc < 0:
        omega = 0.5 * math.sqrt(-disc)
        return BlockSpectrum(lam, disc, complex(-0.5 * s, omega), complex(-0.5 * s, -omega), Regime.ComplexSpiral, omega)
    hi, lo = _real_quadratic_roots(s, lam, disc)
    return BlockSpectrum(lam, disc, complex(hi), complex(lo), Regime.RealNodes, 0.0)


def spiral_frequency(alpha: float, beta: float, lam: float) -> float:
    disc = discriminant(alpha, beta, lam)
    if disc >= 0:
        raise RealRegimeError(f"real regime, no spiral frequency (discriminant {disc:.6g} >= 0)")
    return 0.5 * math.sqrt(-disc)


# -- discrete blocks -------------------------------------------------------


@dataclass(frozen=True)
class DiscreteBlockSpectrum:
    lam: float
    eigenvalues: tuple
    magnitudes: tuple
    determinant: float
    stable: bool

    @property
    def max_magnitude(self) -> float:
        return max(self.magnitudes)


def inna_block_eigs(hp: HyperParams, lam: float) -> DiscreteBlockSpectrum:
    """Eigenvalues of the 2x2 block of the INNA one-step map's Jacobian."""
    gamma = hp.require_gamma()
    s = hp.alpha + hp.beta * lam
    trace = 2.0 - gamma * s
    det = 1.0 - gamma * s + gamma * gamma * lam
    disc = gamma * gamma * (s * s - 4.0 * lam)
    if disc < 0:
        im = 0.5 * math.sqrt(-disc)
        eigs = (complex(0.5 * trace, im), complex(0.5 * trace, -im))
        mag = math.sqrt(max(det, 0.0))
        mags = (mag, mag)
    else:
        # roots of X^2 - trace X + det
        r1, r2 = _real_quadratic_roots(-trace, det, disc)
        eigs = (complex(r1), complex(r2))
        mags = (abs(r1), abs(r2))
    return DiscreteBlockSpectrum(lam, eigs, mags, det, max(mags) < 1.0)


# -- step-size bounds ------------------------------------------------------


def _check_positive(**kw):
    for name, v in kw.items():
        if not (v > 0 and math.isfinite(v)):
            raise ValueError(f"{name} must be positive, got {v}")


def gamma_diffeo_bound(alpha: float, beta: float, L: float) -> float:
    """Largest step for which the INNA map is a local diffeomorphism.

    When ``(alpha + beta L)^2 - 4L < 0`` the radical is undefined and the bound
    reduces to ``beta``.
    """
    _check_positive(alpha=alpha, beta=beta, L=L)
    s = alpha + beta * L
    r = s * s - 4.0 * L
    if r < 0:
        return beta
    # (s - sqrt(r)) / (2L) rewritten without cancellation
    return min(2.0 / (s + math.sqrt(r)), beta)


def gamma_convergence_bound(alpha: float, beta: float, L: float) -> float:
    """Step bound under which INNA's Lyapunov energy decreases."""
    _check_positive(alpha=alpha, beta=beta, L=L)
    return min(2.0 * alpha / ((1.0 + alpha * beta) * L + alpha**2), 1.0 / alpha + beta, 2.0 * beta)


def gamma_bounds(alpha: float, beta: float, L: float) -> dict:
    return {
        "gamma_diffeo": gamma_diffeo_bound(alpha, beta, L),
        "gamma_convergence": gamma_convergence_bound(alpha, beta, L),
    }


# -- block diagonalization -------------------------------------------------


def permutation_matrix(P: int) -> np.ndarray:
    """Permutation ``U`` (2P x 2P) pairing coordinate ``p`` with ``P + p``.

    ``U.T @ A @ U`` is 2x2 block diagonal for any ``A = [[D1, D2], [D3, D4]]``
    with diagonal blocks ``Di``.
    """
    if P < 1:
        raise ValueError(f"P must be a positive integer, got {P}")
    U = np.zeros((2 * P, 2 * P))

    def put(row, col):  # 1-based
        U[row - 1, col - 1] = 1.0

    for p in range(1, P + 1):
        odd = p % 2
        if P % 2:
            if not odd:
                put(P - p + 1, p)
            else:
                put(P + p, 2 * P - p + 1)
                put(p, 2 * P - p)
                put(2 * P - p, p)
        else:
            if odd:
                put(p, p)
                put(P + p, p + 1)
                put(p + 1, P + p)
            else:
                put(P + p, P + p)
    return U


def block_hessian_indices(P: int) -> list:
    """For each 2x2 diagonal block of ``U.T A U``, the (0-based) Hessian index it carries."""
    U = permutation_matrix(P)
    rows = np.argmax(U, axis=0)  # rows[j] = sigma(j)
    return [int(min(rows[2 * k], rows[2 * k + 1]) % P) for k in range(P)]


def din_jacobian(L: Landscape, theta_star, alpha: float, beta: float) -> np.ndarray:
    """Jacobian of the first-order DIN field at ``theta_star``."""
    _check_damping(alpha, beta)
    H = L.hessian(np.asarray(theta_star, dtype=float))
    return din_jacobian_from_hessian(H, alpha, beta)


def din_jacobian_from_hessian(H: np.ndarray, alpha: float, beta: float) -> np.ndarray:
    P = H.shape[0]
    eye = np.eye(P)
    a = alpha - 1.0 / beta
    return np.block([[-beta * H - a * eye, -eye / beta], [-a * eye, -eye / beta]])


def inna_jacobian_from_hessian(H: np.ndarray, hp: HyperParams) -> np.ndarray:
    gamma = hp.require_gamma()
    return np.eye(2 * H.shape[0]) + gamma * din_jacobian_from_hessian(H, hp.alpha, hp.beta)


def block_diagonalize(J: np.ndarray, H: np.ndarray) -> np.ndarray:
    """``U.T (V+V).T J (V+V) U`` with ``V`` the ascending eigenbasis of ``H``."""
    P = H.shape[0]
    _, V = np.linalg.eigh(H)
    W = np.zeros((2 * P, 2 * P))
    W[:P, :P] = V
    W[P:, P:] = V
    U = permutation_matrix(P)
    return U.T @ W.T @ J @ W @ U


# -- classification of stationary points -----------------------------------


@dataclass(frozen=True)
class StationaryClassification:
    in_S: bool
    in_S_neg: bool
    unstable_dim_continuous: int
    unstable_dim_discrete: Optional[int]
    spiral_eigenvalues: list = field(default_factory=list)
    hessian_eigenvalues: list = field(default_factory=list)
    grad_norm: float = 0.0

    def to_dict(self) -> dict:
        return {
            "in_S": self.in_S,
            "in_S_neg": self.in_S_neg,
            "unstable_dim_continuous": self.unstable_dim_continuous,
            "unstable_dim_discrete": self.unstable_dim_discrete,
            "spiral_eigenvalues": list(self.spiral_eigenvalues),
            "hessian_eigenvalues": list(self.hessian_eigenvalues),
            "grad_norm": self.grad_norm,
        }


def classify_stationary(
    L: Landscape,
    theta_star,
    hp: HyperParams,
    tol: float = DEFAULT_CRIT_TOL,
    stability_tol: float = STABILITY_TOL,
) -> StationaryClassification:
    """Membership in S / S_<0 and unstable dimensions of the linearizations.

    The discrete unstable dimension is ``None`` when ``hp.gamma`` is unset.
    """
    theta_star = np.asarray(theta_star, dtype=float)
    gnorm = float(np.linalg.norm(L.gradient(theta_star)))
    lam = np.linalg.eigvalsh(L.hessian(theta_star))
    in_S = gnorm <= tol
    interval = spiral_interval(hp.alpha, hp.beta)

    n_cont = 0
    n_disc = 0 if hp.gamma is not None else None
    for x in lam:
        b = din_block_eigs(hp.alpha, hp.beta, float(x))
        n_cont += sum(1 for z in (b.sigma_plus, b.sigma_minus) if z.real > stability_tol)
        if hp.gamma is not None:
            d = inna_block_eigs(hp, float(x))
            n_disc += sum(1 for m in d.magnitudes if m > 1.0 + stability_tol)

    return StationaryClassification(
        in_S=in_S,
        in_S_neg=in_S and float(lam[0]) < -tol,
        unstable_dim_continuous=n_cont,
        unstable_dim_discrete=n_disc,
        spiral_eigenvalues=[float(x) for x in lam if float(x) in interval],
        hessian_eigenvalues=[float(x) for x in lam],
        grad_norm=gnorm,
    )
