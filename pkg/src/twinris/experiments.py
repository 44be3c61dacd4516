"""End-to-end joint design, baselines, Monte Carlo sweeps and test oracles."""

from __future__ import annotations

import csv
import enum
import io
import itertools
import json
import logging
import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .channel import ChannelRealization, draw_channel
from .config import ConfigError, SystemConfig, trial_rng, upa_shape
from .hybrid import (
    HybridBeamformer,
    QuantizerSet,
    SubArrayDesign,
    assemble_frf,
    compute_Bj,
    compute_interference_matrix,
    continuous_subarray,
    digital_precoder,
    effective_channel,
    greedy_subarray,
    subarray_rate,
)
from .metrics import (
    MetricsRecord,
    PowerModel,
    Variant,
    energy_efficiency,
    rate,
    receive_snr,
    shannon_limit,
    total_power,
)
from .passive import (
    CcmSettings,
    PassivePhaseVector,
    build_R,
    optimize_phases,
    project_discrete,
    random_phases,
)

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# methods
# ---------------------------------------------------------------------------

_METHOD_RE = re.compile(r"^(TWIN|HIGH|LOW|INF_RES|RANDOM_PHI|SHANNON)$|^TWIN_DISCRETE\((\d+)\)$")


@dataclass(frozen=True)
class Method:
    """A compared scheme; ``bits`` is only used by ``TWIN_DISCRETE``."""

    kind: str
    bits: Optional[int] = None

    @classmethod
    def parse(cls, text: str) -> "Method":
        m = _METHOD_RE.match(text.strip().upper())
        if not m:
            raise ValueError(f"unsupported method {text!r}")
        if m.group(1):
            return cls(m.group(1))
        bits = int(m.group(2))
        if bits < 1:
            raise ValueError("TWIN_DISCRETE needs at least one bit")
        return cls("TWIN_DISCRETE", bits)

    def __str__(self):
        return f"TWIN_DISCRETE({self.bits})" if self.kind == "TWIN_DISCRETE" else self.kind

    @property
    def power_variant(self) -> Variant:
        if self.kind in ("HIGH", "INF_RES"):
            return Variant.HIGH
        if self.kind == "LOW":
            return Variant.LOW
        return Variant.TWIN


def _as_method(m) -> Method:
    return m if isinstance(m, Method) else Method.parse(str(m))


# ---------------------------------------------------------------------------
# joint design
# ---------------------------------------------------------------------------

@dataclass
class JointDesign:
    beamformer: HybridBeamformer
    phases: PassivePhaseVector
    stage_rates: List[float] = field(default_factory=list)
    ccm_iterations: List[int] = field(default_factory=list)

    @property
    def f_rf(self) -> np.ndarray:
        return self.beamformer.f_rf

    @property
    def f_bb(self) -> np.ndarray:
        return self.beamformer.f_bb


def ccm_settings(cfg: SystemConfig) -> CcmSettings:
    return CcmSettings(epsilon=cfg.epsilon)


_UNSET = object()


def joint_design(chan: ChannelRealization, cfg: SystemConfig, settings: Optional[CcmSettings] = None,
                 *, phi0=None, rng=None, n_high=None, continuous_analog=False, b_ris=_UNSET,
                 optimize_ris=True, ccm_callback: Optional[Callable] = None) -> JointDesign:
    """Design the analog columns one sub-array at a time, refreshing the RIS
    phases after each, then compute the digital precoder.

    Parameters
    ----------
    phi0 : initial RIS vector; drawn uniformly from ``rng`` when omitted.
    n_high : high-resolution budget per sub-array (default M/2).
    continuous_analog : use unquantized phases (infinite resolution).
    b_ris : RIS bits; defaults to ``cfg.b_ris`` (``None`` = continuous).
    optimize_ris : when False the RIS keeps ``phi0`` throughout.
    ccm_callback : called as ``callback(j, iteration, step)`` per CCM step.
    """
    settings = ccm_settings(cfg) if settings is None else settings
    b_ris = cfg.b_ris if b_ris is _UNSET else b_ris
    if phi0 is None:
        rng = np.random.default_rng(cfg.seed) if rng is None else rng
        phi0 = random_phases(rng, cfg.nris)
    phi = np.asarray(phi0, dtype=complex)
    if b_ris is not None and optimize_ris:
        phi = project_discrete(phi, b_ris).phi

    pt, sigma2, ns, m = cfg.pt_w, cfg.sigma2_w, cfg.ns, cfg.subarray_size
    q_high, q_low = QuantizerSet(cfg.b_high), QuantizerSet(cfg.b_low)
    g, mm = chan.g_matrix, chan.m_matrix
    designs: List[SubArrayDesign] = []
    stage_rates, iters = [], []

    for j in range(1, cfg.n_rf + 1):
        h_eff = effective_channel(g, phi, mm)
        prior = assemble_frf(designs) if designs else None
        if prior is not None:
            prior = np.vstack([prior, np.zeros((cfg.nt - prior.shape[0], prior.shape[1]))])
        t_bar = compute_interference_matrix(h_eff, prior, pt, sigma2, ns)
        b_j = compute_Bj(h_eff, t_bar, j, m)
        if continuous_analog:
            designs.append(continuous_subarray(b_j, pt, sigma2, ns))
        else:
            designs.append(greedy_subarray(b_j, q_high, q_low, pt, sigma2, ns, n_high=n_high))

        if optimize_ris:
            r = build_R(g, mm, designs)
            cb = None if ccm_callback is None else (lambda it, st, _j=j: ccm_callback(_j, it, st))
            res = optimize_phases(phi, r, pt, sigma2, j, settings, callback=cb)
            phi = res.phases.phi
            iters.append(res.iterations)
            if b_ris is not None:
                phi = project_discrete(phi, b_ris).phi

        f_bar = assemble_frf(designs)
        h_stage = effective_channel(g, phi, mm)[:, :f_bar.shape[0]]
        stage_rates.append(rate(h_stage, f_bar, np.eye(j), pt, sigma2, ns))

    f_rf = assemble_frf(designs)
    h_eff = effective_channel(g, phi, mm)
    f_bb, deficient = digital_precoder(h_eff, f_rf, ns)
    bf = HybridBeamformer(designs, f_bb, deficient)
    return JointDesign(bf, PassivePhaseVector(phi), stage_rates, iters)


def evaluate(chan: ChannelRealization, cfg: SystemConfig, design: JointDesign,
             variant=Variant.TWIN, pm: PowerModel = PowerModel()) -> MetricsRecord:
    pt, sigma2, ns = cfg.pt_w, cfg.sigma2_w, cfg.ns
    h_eff = effective_channel(chan.g_matrix, design.phases.phi, chan.m_matrix)
    f_rf, f_bb = design.f_rf, design.f_bb
    r = rate(h_eff, f_rf, f_bb, pt, sigma2, ns)
    p = total_power(cfg, variant, pm, pt)
    return MetricsRecord(
        rate_bps_hz=r,
        rx_snr_db=receive_snr(h_eff, f_rf, f_bb, pt, sigma2, ns),
        total_power_w=p,
        ee=energy_efficiency(r, p),
        shannon_limit_bps_hz=shannon_limit(h_eff, pt, sigma2, ns),
        rank_deficient_flag=design.beamformer.rank_deficient,
    )


def method_options(method, cfg) -> dict:
    """Keyword arguments of :func:`joint_design` that realize ``method``."""
    method = _as_method(method)
    kind = method.kind
    if kind in ("TWIN", "SHANNON"):
        return {}
    if kind == "TWIN_DISCRETE":
        return {"b_ris": method.bits}
    if kind == "HIGH":
        return {"n_high": cfg.subarray_size}
    if kind == "LOW":
        return {"n_high": 0}
    if kind == "INF_RES":
        return {"continuous_analog": True}
    if kind == "RANDOM_PHI":
        return {"optimize_ris": False}
    raise ValueError(f"unsupported method {method}")


def design_for(chan, cfg, method, phi0, settings=None, ccm_callback=None) -> JointDesign:
    return joint_design(chan, cfg, settings, phi0=phi0, ccm_callback=ccm_callback,
                        **method_options(method, cfg))


def _record_for(chan, cfg, method, design, pm):
    rec = evaluate(chan, cfg, design, method.power_variant, pm)
    if method.kind == "SHANNON":
        shannon = rec.shannon_limit_bps_hz
        rec = MetricsRecord(shannon, rec.rx_snr_db, rec.total_power_w,
                            energy_efficiency(shannon, rec.total_power_w), shannon,
                            rec.rank_deficient_flag)
    return rec


def run_baseline(chan: ChannelRealization, cfg: SystemConfig, method, phi0=None, rng=None,
                 settings: Optional[CcmSettings] = None, pm: PowerModel = PowerModel()) -> MetricsRecord:
    """Metrics of one method on one channel.

    ``SHANNON`` reports the water-filling limit of the twin-resolution
    design's effective channel as its rate.
    """
    method = _as_method(method)
    if phi0 is None:
        phi0 = random_phases(np.random.default_rng(cfg.seed) if rng is None else rng, cfg.nris)
    design = design_for(chan, cfg, method, phi0, settings)
    return _record_for(chan, cfg, method, design, pm)


def trial_records(cfg: SystemConfig, trial: int, methods: Sequence, settings=None,
                  pm: PowerModel = PowerModel()) -> Dict[str, MetricsRecord]:
    """Evaluate every method on trial ``trial``'s channel draw.

    The channel and the initial (or, for RANDOM_PHI, fixed) RIS vector both
    come from the trial's own stream, so all methods see the same draw.
    """
    rng = trial_rng(cfg.seed, trial)
    chan = draw_channel(cfg, rng)
    phi0 = random_phases(rng, cfg.nris)
    cache: Dict[str, JointDesign] = {}
    out = {}
    for method in map(_as_method, methods):
        key = "TWIN" if method.kind == "SHANNON" else str(method)
        if key not in cache:
            cache[key] = design_for(chan, cfg, method, phi0, settings)
        out[str(method)] = _record_for(chan, cfg, method, cache[key], pm)
    return out


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

class Axis(enum.Enum):
    PT_DBM = "PT_DBM"
    N_RIS = "N_RIS"
    N_T = "N_T"


@dataclass(frozen=True)
class SweepSpec:
    axis: Axis
    values: tuple
    methods: tuple

    def __post_init__(self):
        object.__setattr__(self, "axis", Axis(self.axis))
        object.__setattr__(self, "values", tuple(self.values))
        object.__setattr__(self, "methods", tuple(_as_method(m) for m in self.methods))
        if not self.values:
            raise ValueError("sweep needs at least one axis value")
        if not self.methods:
            raise ValueError("sweep needs at least one method")
        diffs = np.diff(np.asarray(self.values, dtype=float))
        if len(diffs) and not (np.all(diffs > 0) or np.all(diffs < 0)):
            raise ValueError("axis values must be strictly monotone")
        if self.axis is not Axis.PT_DBM and any(int(v) != v or v < 1 for v in self.values):
            raise ValueError("array-size axis values must be positive integers")

    @classmethod
    def from_dict(cls, d: dict) -> "SweepSpec":
        unknown = set(d) - {"axis", "values", "methods"}
        if unknown:
            raise ValueError(f"unknown sweep keys: {sorted(unknown)}")
        return cls(d["axis"], d["values"], d["methods"])

    @classmethod
    def load(cls, path: str) -> "SweepSpec":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def config_at(cfg: SystemConfig, axis: Axis, value) -> SystemConfig:
    """Scenario at one sweep point (revalidated)."""
    if axis is Axis.PT_DBM:
        return cfg.replace(pt_dbm=float(value))
    w, h = upa_shape(int(value))
    if axis is Axis.N_RIS:
        return cfg.replace(nris_w=w, nris_h=h)
    return cfg.replace(nt_w=w, nt_h=h)


@dataclass(frozen=True)
class ResultRow:
    axis_value: float
    method: str
    trials: int
    seed: int
    rate_mean: float = math.nan
    rate_se: float = math.nan
    rxsnr_db_mean: float = math.nan
    rxsnr_db_se: float = math.nan
    power_w: float = math.nan
    ee_mean: float = math.nan
    ee_se: float = math.nan
    shannon_mean: float = math.nan
    shannon_se: float = math.nan
    rank_deficient_count: int = 0
    error: Optional[str] = None


def _mean_se(x: np.ndarray):
    mean = float(np.mean(x))
    se = float(np.std(x, ddof=1) / np.sqrt(len(x))) if len(x) > 1 else 0.0
    return mean, se


def aggregate(axis_value, method: str, records: Sequence[MetricsRecord], seed: int) -> ResultRow:
    arr = lambda name: np.array([getattr(r, name) for r in records], dtype=float)  # noqa: E731
    rate_m, rate_se = _mean_se(arr("rate_bps_hz"))
    snr_m, snr_se = _mean_se(arr("rx_snr_db"))
    ee_m, ee_se = _mean_se(arr("ee"))
    sh_m, sh_se = _mean_se(arr("shannon_limit_bps_hz"))
    return ResultRow(axis_value, method, len(records), seed, rate_m, rate_se, snr_m, snr_se,
                     float(np.mean(arr("total_power_w"))), ee_m, ee_se, sh_m, sh_se,
                     int(sum(r.rank_deficient_flag for r in records)))


def _trial_job(args):
    cfg, trial, methods, settings = args
    return trial_records(cfg, trial, methods, settings)


def run_sweep(spec: SweepSpec, cfg: SystemConfig, trials: Optional[int] = None, threads: int = 1,
              settings: Optional[CcmSettings] = None) -> List[ResultRow]:
    """Monte Carlo sweep; rows ordered by (axis value, method).

    A sweep point whose derived configuration is invalid yields rows with
    ``error`` set and NaN metrics; the remaining points still run.
    """
    trials = cfg.trials if trials is None else int(trials)
    methods = [str(m) for m in spec.methods]
    points = []
    for value in spec.values:
        try:
            points.append((value, config_at(cfg, spec.axis, value), None))
        except ConfigError as exc:
            log.warning("sweep point %s=%s skipped: %s", spec.axis.value, value, exc)
            points.append((value, None, str(exc)))

    jobs = [(pcfg, t, methods, settings) for _, pcfg, _ in points if pcfg is not None
            for t in range(trials)]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_trial_job, jobs, chunksize=max(1, len(jobs) // (4 * threads))))
    else:
        results = [_trial_job(job) for job in jobs]

    rows, k = [], 0
    for value, pcfg, err in points:
        if pcfg is None:
            rows.extend(ResultRow(value, m, trials, cfg.seed, error=err) for m in methods)
            continue
        chunk = results[k:k + trials]
        k += trials
        for m in methods:
            rows.append(aggregate(value, m, [r[m] for r in chunk], cfg.seed))
    return rows


CSV_HEADER = ["axis", "method", "trials", "rate_mean", "rate_se", "rxsnr_db_mean", "rxsnr_db_se",
              "power_w", "ee_mean", "ee_se", "shannon_mean"]


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x) if math.isfinite(x) else ("nan" if math.isnan(x) else ("inf" if x > 0 else "-inf"))
    return str(x)


def rows_to_csv(rows: Sequence[ResultRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow([_fmt(v) for v in (r.axis_value, r.method, r.trials, r.rate_mean, r.rate_se,
                                      r.rxsnr_db_mean, r.rxsnr_db_se, r.power_w, r.ee_mean,
                                      r.ee_se, r.shannon_mean)])
    return buf.getvalue()


def write_csv(rows: Sequence[ResultRow], path: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(rows_to_csv(rows))


# ---------------------------------------------------------------------------
# oracles
# ---------------------------------------------------------------------------

ORACLE_CAP = 1_000_000


def oracle_exhaustive_subarray(b_j, q_high: QuantizerSet, q_low: QuantizerSet, pt, sigma2, ns,
                               n_high=None, cap=ORACLE_CAP):
    """Exact maximum of the sub-array rate over every resolution mask with
    the given budget and every grid phase. Returns (best_rate, best_design).
    """
    m = b_j.shape[0]
    n_high = m // 2 if n_high is None else n_high
    masks = list(itertools.combinations(range(m), n_high))
    per_mask = q_high.size ** n_high * q_low.size ** (m - n_high)
    if len(masks) * per_mask > cap:
        raise ValueError(f"search space {len(masks) * per_mask} exceeds cap {cap}")
    rho = pt / (sigma2 * ns)
    best_rate, best = -math.inf, None
    for highs in masks:
        is_high = np.zeros(m, dtype=bool)
        is_high[list(highs)] = True
        grids = [range(q_high.size) if h else range(q_low.size) for h in is_high]
        idx = np.array(list(itertools.product(*grids)), dtype=int)
        steps = np.where(is_high, q_high.step, q_low.step)
        f = np.exp(1j * idx * steps) / np.sqrt(m)
        gains = np.real(np.einsum("ki,ij,kj->k", f.conj(), b_j, f))
        k = int(np.argmax(gains))
        value = math.log2(1.0 + rho * gains[k])
        if value > best_rate:
            best_rate = value
            best = SubArrayDesign(f[k], is_high.astype(int), idx[k])
    return best_rate, best


def random_feasible_subarray(rng: np.random.Generator, m: int, q_high: QuantizerSet,
                             q_low: QuantizerSet, n_high=None) -> SubArrayDesign:
    n_high = m // 2 if n_high is None else n_high
    is_high = np.zeros(m, dtype=bool)
    is_high[rng.permutation(m)[:n_high]] = True
    idx = np.where(is_high, rng.integers(0, q_high.size, m), rng.integers(0, q_low.size, m))
    steps = np.where(is_high, q_high.step, q_low.step)
    return SubArrayDesign(np.exp(1j * idx * steps) / np.sqrt(m), is_high.astype(int), idx)


def random_hermitian_psd(rng: np.random.Generator, m: int, rank=None) -> np.ndarray:
    rank = m if rank is None else rank
    a = (rng.standard_normal((m, rank)) + 1j * rng.standard_normal((m, rank))) / np.sqrt(2)
    return a @ a.conj().T
