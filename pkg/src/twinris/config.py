"""Scenario configuration, unit conversions and seeded random streams."""

from __future__ import annotations

import dataclasses
import json
import math
import os
from dataclasses import dataclass, field
from typing import Any, Optional, Tuple

import numpy as np

SEED_ENV_VAR = "TWINRIS_SEED"


class ConfigError(ValueError):
    """Raised when a scenario violates a structural constraint.

    ``code`` identifies which constraint failed, so callers (and tests)
    can tell violations apart without parsing the message.
    """

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


# ---------------------------------------------------------------------------
# Units
# ---------------------------------------------------------------------------

def dbm_to_watts(x_dbm: float) -> float:
    return 10.0 ** ((x_dbm - 30.0) / 10.0)


def watts_to_dbm(x_w: float) -> float:
    return 10.0 * math.log10(x_w) + 30.0


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def noise_power_dbm(bandwidth_hz: float) -> float:
    """Thermal noise floor in dBm for a receiver of the given bandwidth."""
    if not bandwidth_hz > 0:
        raise ValueError(f"bandwidth must be positive, got {bandwidth_hz}")
    return -174.0 + 10.0 * math.log10(bandwidth_hz)


def path_loss_db(distance_m: float) -> float:
    """Distance-dependent large-scale loss, -30 - 22 log10(d) dB."""
    if not distance_m > 0:
        raise ValueError(f"distance must be positive, got {distance_m}")
    return -30.0 - 22.0 * math.log10(distance_m)


def path_loss_amplitude(loss_db: float) -> float:
    """Linear amplitude factor sqrt(10^(A/10)) for a loss given in dB."""
    return math.sqrt(db_to_linear(loss_db))


def distance(a: Tuple[float, float], b: Tuple[float, float]) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SystemConfig:
    """All constants of one simulated scenario.

    ``b_ris=None`` means continuous (infinite-resolution) RIS phases.
    Defaults: 8x8 BS array, 4 RF chains, 4 paths per link, 30 dBm,
    28 GHz / 251.1886 MHz, 4-bit and 1-bit phase shifters, BS at the origin,
    RIS at (100, 10) m and the user at (200, 0) m. The 2x2 user array and
    the 8x8 RIS are choices of this package.
    """

    nt_w: int = 8
    nt_h: int = 8
    nr_w: int = 2
    nr_h: int = 2
    nris_w: int = 8
    nris_h: int = 8
    n_rf: int = 4
    n_paths_br: int = 4
    n_paths_ru: int = 4
    pt_dbm: float = 30.0
    carrier_hz: float = 28e9
    bandwidth_hz: float = 251.1886e6
    b_high: int = 4
    b_low: int = 1
    b_ris: Optional[int] = None
    bs_xy: Tuple[float, float] = (0.0, 0.0)
    ris_xy: Tuple[float, float] = (100.0, 10.0)
    user_xy: Tuple[float, float] = (200.0, 0.0)
    element_spacing_wavelengths: float = 0.5
    epsilon: float = 1e-6
    trials: int = 100
    seed: int = 0

    def __post_init__(self):
        # tuples may arrive as lists from JSON
        for name in ("bs_xy", "ris_xy", "user_xy"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        self.validate()

    # derived quantities -------------------------------------------------
    @property
    def nt(self) -> int:
        return self.nt_w * self.nt_h

    @property
    def nr(self) -> int:
        return self.nr_w * self.nr_h

    @property
    def nris(self) -> int:
        return self.nris_w * self.nris_h

    @property
    def ns(self) -> int:
        return self.n_rf

    @property
    def subarray_size(self) -> int:
        return self.nt // self.n_rf

    @property
    def pt_w(self) -> float:
        return dbm_to_watts(self.pt_dbm)

    @property
    def sigma2_w(self) -> float:
        return dbm_to_watts(noise_power_dbm(self.bandwidth_hz))

    def validate(self) -> None:
        for name in ("nt_w", "nt_h", "nr_w", "nr_h", "nris_w", "nris_h", "n_rf"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise ConfigError("array_dim", f"{name} must be a positive integer, got {value!r}")
        if self.n_paths_br < 1 or self.n_paths_ru < 1:
            raise ConfigError("path_count", "each link needs at least one propagation path")
        if self.nt % self.n_rf != 0:
            raise ConfigError("rf_divisibility", f"N_t={self.nt} is not divisible by N_RF={self.n_rf}")
        if self.subarray_size % 2 != 0:
            raise ConfigError("subarray_parity", f"sub-array size {self.subarray_size} must be even")
        if self.b_low < 1:
            raise ConfigError("b_low", f"b_low must be >= 1, got {self.b_low}")
        if self.b_high <= self.b_low:
            raise ConfigError("b_order", f"b_high={self.b_high} must exceed b_low={self.b_low}")
        if self.b_ris is not None and self.b_ris < 1:
            raise ConfigError("b_ris", f"b_ris must be >= 1 or infinite, got {self.b_ris}")
        if not math.isfinite(self.pt_dbm):
            raise ConfigError("pt_dbm", "transmit power must be finite")
        if not (self.epsilon > 0):
            raise ConfigError("epsilon", f"epsilon must be positive, got {self.epsilon}")
        if not self.bandwidth_hz > 0:
            raise ConfigError("bandwidth", "bandwidth must be positive")
        if not self.element_spacing_wavelengths > 0:
            raise ConfigError("spacing", "element spacing must be positive")
        if self.trials < 1:
            raise ConfigError("trials", "trials must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed", "seed must be a non-negative integer")
        coords = self.bs_xy + self.ris_xy + self.user_xy
        if not all(math.isfinite(c) for c in coords):
            raise ConfigError("coordinates", "coordinates must be finite")

    def replace(self, **changes: Any) -> "SystemConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for name in ("bs_xy", "ris_xy", "user_xy"):
            d[name] = list(d[name])
        return d


def derive_geometry(cfg: SystemConfig) -> Tuple[float, float]:
    """Return (BS-RIS, RIS-user) distances in meters."""
    return distance(cfg.bs_xy, cfg.ris_xy), distance(cfg.ris_xy, cfg.user_xy)


def _parse_b_ris(value):
    if value is None:
        return None
    if isinstance(value, str):
        if value.strip().lower() in ("inf", "infinite", "infinity"):
            return None
        raise ConfigError("b_ris", f"unrecognised b_ris value {value!r}")
    if isinstance(value, float) and math.isinf(value):
        return None
    return int(value)


def config_from_dict(data: dict) -> SystemConfig:
    known = {f.name for f in dataclasses.fields(SystemConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError("unknown_key", f"unknown configuration keys: {', '.join(unknown)}")
    data = dict(data)
    if "b_ris" in data:
        data["b_ris"] = _parse_b_ris(data["b_ris"])
    return SystemConfig(**data)


def load_config(path: Optional[str] = None, env: Optional[dict] = None) -> SystemConfig:
    """Load a JSON config (or the defaults) and apply the seed override.

    The environment variable ``TWINRIS_SEED`` replaces the ``seed`` field.
    """
    data = {}
    if path is not None:
        with open(path) as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ConfigError("format", "configuration file must hold a JSON object")
    env = os.environ if env is None else env
    if env.get(SEED_ENV_VAR):
        try:
            data["seed"] = int(env[SEED_ENV_VAR])
        except ValueError as exc:
            raise ConfigError("seed", f"{SEED_ENV_VAR} is not an integer") from exc
    return config_from_dict(data)


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Independent stream for one Monte Carlo trial.

    The trial index goes into the seed sequence's spawn key, so trial ``k``
    gets the same stream whatever order trials are executed in.
    """
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(trial,)))


def upa_shape(n: int) -> Tuple[int, int]:
    """Near-square (w, h) factorisation with w >= h, used by sweeps."""
    h = int(math.isqrt(n))
    while n % h:
        h -= 1
    return n // h, h
