"""RIS phase design by gradient ascent on the complex circle manifold.

After ``j`` sub-arrays are fixed, the RIS vector maximizes the surrogate

    f(phi) = j * log2(1 + P_t / (sigma^2 j^2) * phi^H R phi)

over unit-modulus vectors, where ``phi^H R phi`` equals
``||G diag(phi) M F_j||_F^2`` for the first ``j`` analog columns ``F_j``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from .hybrid import SubArrayDesign, circular_distance

TWO_PI = 2 * np.pi


@dataclass(frozen=True)
class CcmSettings:
    max_iters: int = 500
    epsilon: float = 1e-6
    armijo_init: float = 1.0
    armijo_shrink: float = 0.5
    armijo_slope: float = 1e-4
    max_backtracks: int = 50
    armijo_grow: float = 2.0

    def __post_init__(self):
        if self.max_iters < 1 or self.max_backtracks < 1:
            raise ValueError("iteration limits must be positive")
        if not self.epsilon > 0 or not self.armijo_init > 0:
            raise ValueError("epsilon and initial step must be positive")
        if not 0 < self.armijo_shrink < 1 or not 0 < self.armijo_slope < 1:
            raise ValueError("Armijo shrink and slope must lie in (0, 1)")
        if self.armijo_grow < 1:
            raise ValueError("armijo_grow must be >= 1")


@dataclass(frozen=True)
class PassivePhaseVector:
    phi: np.ndarray

    def __post_init__(self):
        if not np.allclose(np.abs(self.phi), 1.0, atol=1e-12, rtol=0):
            raise ValueError("RIS coefficients must have unit modulus")

    @property
    def angles(self) -> np.ndarray:
        return np.angle(self.phi)


@dataclass
class CcmStep:
    phi: np.ndarray
    value: float
    step: float
    grad_norm: float
    accepted: bool


@dataclass
class CcmResult:
    phases: PassivePhaseVector
    value: float
    iterations: int
    converged: bool
    trace: List[CcmStep] = field(default_factory=list)


def random_phases(rng: np.random.Generator, n: int) -> np.ndarray:
    return np.exp(1j * rng.uniform(0, TWO_PI, n))


def build_R(g_matrix, m_matrix, sub_arrays: Sequence[SubArrayDesign]):
    """R = sum_i diag(M_i f_i)^H G^H G diag(M_i f_i) over the designed
    sub-arrays, M_i being the i-th column block of M."""
    gram = g_matrix.conj().T @ g_matrix
    nris = m_matrix.shape[0]
    r = np.zeros((nris, nris), dtype=complex)
    start = 0
    for s in sub_arrays:
        d = m_matrix[:, start:start + s.size] @ s.phase_vector
        r += np.conj(d)[:, None] * gram * d[None, :]
        start += s.size
    return 0.5 * (r + r.conj().T)


def quadratic_form(phi, r):
    """Real part of phi^H R phi; raises if the imaginary residue is not
    negligible (R is expected Hermitian)."""
    q = np.vdot(phi, r @ phi)
    scale = max(np.linalg.norm(r), 1e-300) * max(np.vdot(phi, phi).real, 1.0)
    if abs(q.imag) > 1e-9 * scale:
        raise ValueError("R is not Hermitian: quadratic form has an imaginary part")
    return float(q.real)


def bound_objective(phi, r, pt, sigma2, j):
    return j * np.log2(1.0 + pt / (sigma2 * j * j) * quadratic_form(phi, r))


def euclidean_gradient(phi, r, pt, sigma2, j):
    """Ascent direction of the surrogate (conjugate Wirtinger derivative
    times two)."""
    r_phi = r @ phi
    denom = 1.0 + pt / (sigma2 * j * j) * np.real(np.vdot(phi, r_phi))
    return (2 * pt / (sigma2 * j)) * r_phi / (np.log(2) * denom)


def riemannian_gradient(phi, euclid_grad):
    """Project onto the tangent space {z : Re(z * conj(phi)) = 0}."""
    return euclid_grad - np.real(euclid_grad * np.conj(phi)) * phi


def retract(x):
    mag = np.abs(x)
    out = np.where(mag > 0, x / np.where(mag > 0, mag, 1.0), 1.0 + 0j)
    return out


def ccm_step(phi, r, pt, sigma2, j, settings: CcmSettings = CcmSettings(), value=None,
             step0=None):
    """One Armijo-backtracked ascent step; returns a :class:`CcmStep`.

    Backtracking starts from ``step0`` (default ``settings.armijo_init``).
    A step that cannot satisfy the sufficient-increase test within
    ``max_backtracks`` shrinks is rejected and ``phi`` returned as is; so
    is a stationary point (tangent gradient negligible next to the
    Euclidean one).
    """
    f0 = bound_objective(phi, r, pt, sigma2, j) if value is None else value
    egrad = euclidean_gradient(phi, r, pt, sigma2, j)
    grad = riemannian_gradient(phi, egrad)
    gnorm2 = float(np.real(np.vdot(grad, grad)))
    # tangent part at rounding level: phi is already stationary
    if gnorm2 <= (1e-12 * np.linalg.norm(egrad)) ** 2:
        return CcmStep(phi, f0, 0.0, np.sqrt(gnorm2), False)
    step = settings.armijo_init if step0 is None else step0
    for _ in range(settings.max_backtracks):
        cand = retract(phi + step * grad)
        f1 = bound_objective(cand, r, pt, sigma2, j)
        if f1 >= f0 + settings.armijo_slope * step * gnorm2:
            return CcmStep(cand, f1, step, np.sqrt(gnorm2), True)
        step *= settings.armijo_shrink
    return CcmStep(phi, f0, 0.0, np.sqrt(gnorm2), False)


def optimize_phases(phi0, r, pt, sigma2, j, settings: CcmSettings = CcmSettings(),
                    keep_trace=False, callback: Optional[Callable[[int, CcmStep], None]] = None):
    """Iterate :func:`ccm_step` until the objective moves by less than
    ``epsilon`` or ``max_iters`` is reached.

    Each line search after the first starts from ``armijo_grow`` times the
    previously accepted step.
    """
    phi = retract(np.asarray(phi0, dtype=complex))
    value = bound_objective(phi, r, pt, sigma2, j)
    trace = []
    converged = False
    it = 0
    step0 = settings.armijo_init
    for it in range(1, settings.max_iters + 1):
        st = ccm_step(phi, r, pt, sigma2, j, settings, value, step0)
        if keep_trace:
            trace.append(st)
        if callback is not None:
            callback(it, st)
        if not st.accepted:
            converged = True
            break
        delta = st.value - value
        phi, value = st.phi, st.value
        step0 = st.step * settings.armijo_grow
        if abs(delta) < settings.epsilon:
            converged = True
            break
    return CcmResult(PassivePhaseVector(phi), value, it, converged, trace)


def project_discrete(phi, b_ris):
    """Snap every RIS phase to the nearest point of {2 pi k / 2^b_ris}."""
    if b_ris < 1:
        raise ValueError("RIS resolution must be at least one bit")
    step = TWO_PI / 2 ** b_ris
    theta = np.mod(np.angle(phi), TWO_PI)
    k = np.mod(np.rint(theta / step), 2 ** b_ris)
    return PassivePhaseVector(np.exp(1j * k * step))


def projection_error(phi, b_ris):
    return circular_distance(np.angle(phi), np.angle(project_discrete(phi, b_ris).phi))
