"""Link metrics: achievable rate, receive SNR, power and energy efficiency."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, asdict
from typing import Sequence

import numpy as np

from .config import SystemConfig
from .hybrid import assemble_frf


class NumericalError(ArithmeticError):
    pass


class Variant(enum.Enum):
    TWIN = "TWIN"
    HIGH = "HIGH"
    LOW = "LOW"


@dataclass(frozen=True)
class PowerModel:
    """Device power draw in mW."""

    p_bb: float = 200.0
    p_rf: float = 300.0
    p_high: float = 52.0
    p_low: float = 10.0
    p_switch: float = 1.0
    p_ris: float = 1.0

    def __post_init__(self):
        if min(asdict(self).values()) < 0:
            raise ValueError("device powers must be non-negative")


@dataclass(frozen=True)
class MetricsRecord:
    rate_bps_hz: float
    rx_snr_db: float
    total_power_w: float
    ee: float
    shannon_limit_bps_hz: float
    rank_deficient_flag: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def _logdet2_hermitian_plus_identity(a: np.ndarray) -> float:
    """log2 det(I + A) for Hermitian PSD A via Cholesky."""
    n = a.shape[0]
    herm = 0.5 * (a + a.conj().T) + np.eye(n)
    try:
        chol = np.linalg.cholesky(herm)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("I + A is not positive definite") from exc
    value = 2.0 * float(np.sum(np.log2(np.abs(np.diag(chol)))))
    if not math.isfinite(value):
        raise NumericalError("non-finite log-determinant")
    return value


def rate(h_eff, f_rf, f_bb, pt, sigma2, ns):
    """Achievable bandwidth efficiency in bit/s/Hz."""
    hf = h_eff @ f_rf @ f_bb
    return _logdet2_hermitian_plus_identity((pt / (sigma2 * ns)) * (hf @ hf.conj().T))


def sic_rate(h_eff, f_rf, pt, sigma2, ns):
    """Rate written as a sum of per-column terms, each column seeing the
    earlier ones as interference:

        sum_j log2(1 + rho f_j^H H^H T_j^-1 H f_j),
        T_j = I + rho H F_{<j} F_{<j}^H H^H,  rho = P_t / (sigma^2 N_s).

    Equals :func:`rate` when F_BB is unitary. ``f_rf`` may also be the
    list of sub-array designs.
    """
    if not isinstance(f_rf, np.ndarray):
        f_rf = assemble_frf(f_rf)
    rho = pt / (sigma2 * ns)
    nr = h_eff.shape[0]
    hf = h_eff @ f_rf
    t = np.eye(nr, dtype=complex)
    total = 0.0
    for j in range(hf.shape[1]):
        h_j = hf[:, j]
        gain = np.real(np.vdot(h_j, np.linalg.solve(t, h_j)))
        total += math.log2(1.0 + rho * gain)
        t = t + rho * np.outer(h_j, h_j.conj())
    return total


def receive_snr_linear(h_eff, f_rf, f_bb, pt, sigma2, ns):
    hf = h_eff @ f_rf @ f_bb
    return pt * float(np.real(np.vdot(hf, hf))) / (sigma2 * ns)


def receive_snr(h_eff, f_rf, f_bb, pt, sigma2, ns):
    """Receive SNR in dB; ``-inf`` when the effective channel is zero."""
    lin = receive_snr_linear(h_eff, f_rf, f_bb, pt, sigma2, ns)
    if lin <= 0.0:
        return -math.inf
    return 10.0 * math.log10(lin)


def total_power(cfg: SystemConfig, variant, pm: PowerModel = PowerModel(), pt=None):
    """Total consumption in W for the twin, all-high or all-low hardware.

    Only the twin-resolution hardware carries the N_t switches.
    """
    variant = Variant(variant)
    pt = cfg.pt_w if pt is None else pt
    common_mw = pm.p_bb + cfg.n_rf * pm.p_rf + cfg.nris * pm.p_ris
    if variant is Variant.TWIN:
        shifters_mw = cfg.nt / 2 * (pm.p_high + pm.p_low) + cfg.nt * pm.p_switch
    elif variant is Variant.HIGH:
        shifters_mw = cfg.nt * pm.p_high
    else:
        shifters_mw = cfg.nt * pm.p_low
    return pt + (common_mw + shifters_mw) * 1e-3


def energy_efficiency(rate_bps_hz, power_w):
    if not power_w > 0:
        raise ValueError("power must be positive")
    return rate_bps_hz / power_w


def water_filling(gains: Sequence[float], total_power_w: float, noise: float):
    """Optimal power split over parallel channels with power gains
    ``gains``; returns the per-channel powers."""
    g = np.asarray(gains, dtype=float)
    p = np.zeros_like(g)
    active = g > 0
    if not np.any(active) or total_power_w <= 0:
        return p
    inv = noise / g[active]
    lo, hi = float(np.min(inv)), float(np.max(inv)) + total_power_w
    for _ in range(200):
        mu = 0.5 * (lo + hi)
        used = np.sum(np.maximum(mu - inv, 0.0))
        if used > total_power_w:
            hi = mu
        else:
            lo = mu
    alloc = np.maximum(lo - inv, 0.0)
    # put the bisection residue back on the active modes
    alloc[alloc > 0] += (total_power_w - alloc.sum()) / max(np.count_nonzero(alloc), 1)
    p[active] = alloc
    return p


def shannon_limit(h_eff, pt, sigma2, ns):
    """Water-filling capacity of ``h_eff`` over at most ``ns`` modes."""
    s = np.linalg.svd(h_eff, compute_uv=False)[:ns]
    gains = s ** 2
    p = water_filling(gains, pt, sigma2)
    return float(np.sum(np.log2(1.0 + p * gains / sigma2)))
