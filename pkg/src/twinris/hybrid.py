"""Sub-connected twin-resolution analog beamformer and SVD digital precoder.

The analog matrix is block diagonal: RF chain ``j`` drives its own group of
``M = N_t / N_RF`` antennas through a phase vector of modulus ``1/sqrt(M)``.
Columns are designed one at a time; the ``j``-th design sees the earlier
columns only through the interference matrix ``T_j``.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

TWO_PI = 2 * np.pi


class Resolution(enum.IntEnum):
    LOW = 0
    HIGH = 1


@dataclass(frozen=True)
class QuantizerSet:
    """Uniform phase grid {2 pi k / 2^bits}."""

    bits: int

    def __post_init__(self):
        if self.bits < 1:
            raise ValueError("a phase quantizer needs at least one bit")

    @property
    def size(self) -> int:
        return 2 ** self.bits

    @property
    def step(self) -> float:
        return TWO_PI / self.size

    @property
    def phases(self) -> np.ndarray:
        return np.arange(self.size) * self.step

    def nearest(self, theta):
        """Index of the closest grid phase and the circular error."""
        theta = np.mod(theta, TWO_PI)
        idx = np.mod(np.rint(theta / self.step).astype(int), self.size)
        return idx, circular_distance(theta, idx * self.step)


def circular_distance(a, b):
    d = np.abs(np.mod(np.asarray(a) - np.asarray(b), TWO_PI))
    return np.minimum(d, TWO_PI - d)


@dataclass(frozen=True)
class SubArrayDesign:
    """Phase vector of one RF chain's sub-array.

    ``resolution_mask`` and ``phase_indices`` are ``None`` for a continuous
    (infinite-resolution) design.
    """

    phase_vector: np.ndarray
    resolution_mask: Optional[np.ndarray] = None
    phase_indices: Optional[np.ndarray] = None

    @property
    def size(self) -> int:
        return len(self.phase_vector)

    @property
    def n_high(self) -> int:
        return int(np.sum(self.resolution_mask == Resolution.HIGH))

    @property
    def n_low(self) -> int:
        return int(np.sum(self.resolution_mask == Resolution.LOW))

    def check(self, q_high: QuantizerSet, q_low: QuantizerSet, n_high=None, tol=1e-12) -> None:
        """Assert the structural invariants; raises AssertionError."""
        m = self.size
        assert np.allclose(np.abs(self.phase_vector), 1 / np.sqrt(m), atol=tol, rtol=0)
        if self.resolution_mask is None:
            return
        n_high = m // 2 if n_high is None else n_high
        assert self.n_high == n_high and self.n_low == m - n_high
        angles = np.angle(self.phase_vector)
        for res, q in ((Resolution.HIGH, q_high), (Resolution.LOW, q_low)):
            sel = self.resolution_mask == res
            grid = self.phase_indices[sel] * q.step
            assert np.all(circular_distance(angles[sel], grid) < 1e-12 + tol)


@dataclass(frozen=True)
class HybridBeamformer:
    sub_arrays: List[SubArrayDesign]
    f_bb: np.ndarray
    rank_deficient: bool = False

    @property
    def f_rf(self) -> np.ndarray:
        return assemble_frf(self.sub_arrays)

    def to_json(self) -> str:
        def cplx(a):
            a = np.asarray(a)
            return {"shape": list(a.shape), "re": a.real.ravel().tolist(), "im": a.imag.ravel().tolist()}

        doc = {
            "sub_arrays": [
                {
                    "phase_vector": cplx(s.phase_vector),
                    "resolution_mask": None if s.resolution_mask is None
                    else [Resolution(int(r)).name for r in s.resolution_mask],
                    "phase_indices": None if s.phase_indices is None else s.phase_indices.tolist(),
                }
                for s in self.sub_arrays
            ],
            "f_rf": cplx(self.f_rf),
            "f_bb": cplx(self.f_bb),
            "rank_deficient": self.rank_deficient,
        }
        return json.dumps(doc)


def effective_channel(g_matrix: np.ndarray, phi: np.ndarray, m_matrix: np.ndarray) -> np.ndarray:
    """G diag(phi) M."""
    return (g_matrix * phi[None, :]) @ m_matrix


def compute_interference_matrix(h_eff, prior_columns, pt, sigma2, ns):
    """T_j = I + (P_t / sigma^2 N_s) H F_prev F_prev^H H^H."""
    nr = h_eff.shape[0]
    t = np.eye(nr, dtype=complex)
    if prior_columns is None or prior_columns.shape[1] == 0:
        return t
    hf = h_eff @ prior_columns
    return t + (pt / (sigma2 * ns)) * (hf @ hf.conj().T)


def compute_Bj(h_eff, t_bar, j, m_size):
    """M x M diagonal block ``j`` (1-based) of H^H T^-1 H."""
    cols = slice(m_size * (j - 1), m_size * j)
    h_j = h_eff[:, cols]
    x = np.linalg.solve(t_bar, h_j)
    b = h_j.conj().T @ x
    return 0.5 * (b + b.conj().T)


def principal_vector(b: np.ndarray) -> np.ndarray:
    """Dominant eigenvector of a Hermitian PSD matrix, phase-fixed so the
    first non-negligible entry is real and positive."""
    _, vecs = np.linalg.eigh(b)
    v = vecs[:, -1]
    nz = np.flatnonzero(np.abs(v) > 1e-12 * np.max(np.abs(v)))
    k = nz[0] if len(nz) else 0
    return v * np.exp(-1j * np.angle(v[k]))


def quadratic_gain(f, b_bar):
    return float(np.real(np.vdot(f, b_bar @ f)))


def subarray_rate(f, b_j, pt, sigma2, ns):
    """log2(1 + (P_t / sigma^2 N_s) f^H B f)."""
    return float(np.log2(1.0 + (pt / (sigma2 * ns)) * np.real(np.vdot(f, b_j @ f))))


def coordinate_update(f, b_bar, i):
    """Best unit-modulus phase for entry ``i`` with the others held fixed.

    Returns ``f[i]`` unchanged when the coupling to the other entries
    vanishes, since every phase is then equally good.
    """
    u = b_bar[i] @ f - b_bar[i, i] * f[i]
    mag = np.abs(u)
    if mag <= 1e-300:
        return f[i]
    return u / mag * np.abs(f[i])


def greedy_subarray(b_j, q_high, q_low, pt, sigma2, ns, n_high=None):
    """Greedy joint connection and phase design of one sub-array.

    Starting from the phases of the principal eigenvector of ``b_j``, each
    round quantizes the free entry with the smallest quantization error,
    choosing the low-resolution shifter when its best error is strictly
    smaller and low shifters remain, the high one otherwise; once one
    budget is used up the other set takes every remaining entry. After each
    fix, all still-free entries get one coordinate-ascent sweep.

    ``n_high`` sets the high-resolution budget (default M/2); ``0`` or ``M``
    gives the all-low / all-high single-resolution beamformers.
    """
    m = b_j.shape[0]
    n_high = m // 2 if n_high is None else int(n_high)
    n_low = m - n_high
    if not 0 <= n_high <= m:
        raise ValueError("high-resolution budget out of range")
    b_bar = (pt / (sigma2 * ns)) * b_j
    amp = 1 / np.sqrt(m)

    f = amp * np.exp(1j * np.angle(principal_vector(b_j)))
    mask = np.full(m, -1, dtype=int)
    indices = np.zeros(m, dtype=int)
    free = list(range(m))
    c_high = c_low = 0

    while free:
        theta = np.angle(f[free])
        idx_h, err_h = q_high.nearest(theta)
        idx_l, err_l = q_low.nearest(theta)
        k_h = int(np.argmin(err_h))
        k_l = int(np.argmin(err_l))
        if c_low >= n_low:
            use_low = False
        elif c_high >= n_high:
            use_low = True
        else:
            use_low = err_l[k_l] < err_h[k_h]

        if use_low:
            i, q, k = free[k_l], q_low, int(idx_l[k_l])
            mask[i] = Resolution.LOW
            c_low += 1
        else:
            i, q, k = free[k_h], q_high, int(idx_h[k_h])
            mask[i] = Resolution.HIGH
            c_high += 1
        indices[i] = k
        f[i] = amp * np.exp(1j * k * q.step)
        free.remove(i)

        for r in free:
            f[r] = coordinate_update(f, b_bar, r)

    return SubArrayDesign(f, mask, indices)


def continuous_subarray(b_j, pt, sigma2, ns, max_sweeps=200, tol=1e-12):
    """Unquantized design: coordinate ascent from the principal-eigenvector
    phases until the quadratic gain stops improving."""
    m = b_j.shape[0]
    b_bar = (pt / (sigma2 * ns)) * b_j
    f = np.exp(1j * np.angle(principal_vector(b_j))) / np.sqrt(m)
    last = quadratic_gain(f, b_bar)
    for _ in range(max_sweeps):
        for i in range(m):
            f[i] = coordinate_update(f, b_bar, i)
        now = quadratic_gain(f, b_bar)
        if now - last <= tol * max(1.0, abs(now)):
            break
        last = now
    return SubArrayDesign(f)


def assemble_frf(sub_arrays: Sequence[SubArrayDesign]) -> np.ndarray:
    n_rf = len(sub_arrays)
    m = sub_arrays[0].size
    f_rf = np.zeros((m * n_rf, n_rf), dtype=complex)
    for j, s in enumerate(sub_arrays):
        if s.size != m:
            raise ValueError("all sub-arrays must have the same size")
        f_rf[j * m:(j + 1) * m, j] = s.phase_vector
    return f_rf


def digital_precoder(h_eff, f_rf, ns):
    """F_BB = (F_RF^H F_RF)^(-1/2) V, V the leading right singular vectors
    of H F_RF.

    Returns ``(f_bb, rank_deficient)``. When H F_RF has rank below ``ns``
    the trailing columns come from the orthonormal completion of the full
    right singular basis.
    """
    hf = h_eff @ f_rf
    _, s, vh = np.linalg.svd(hf, full_matrices=True)
    v = vh.conj().T[:, :ns]
    tol = max(hf.shape) * np.finfo(float).eps * (s[0] if len(s) else 0.0)
    rank = int(np.sum(s > tol))
    gram = f_rf.conj().T @ f_rf
    w, u = np.linalg.eigh(gram)
    inv_sqrt = (u / np.sqrt(w)) @ u.conj().T
    return inv_sqrt @ v, rank < ns
