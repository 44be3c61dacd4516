import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from twinris.config import SystemConfig
from twinris.hybrid import SubArrayDesign, assemble_frf, digital_precoder, effective_channel
from twinris.metrics import (
    MetricsRecord,
    NumericalError,
    PowerModel,
    Variant,
    energy_efficiency,
    rate,
    receive_snr,
    receive_snr_linear,
    shannon_limit,
    sic_rate,
    total_power,
    water_filling,
)

seeds = st.integers(0, 2 ** 32 - 1)


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def random_frf(rng, n_rf, m):
    return assemble_frf([SubArrayDesign(np.exp(1j * rng.uniform(0, 2 * np.pi, m)) / np.sqrt(m))
                         for _ in range(n_rf)])


def random_unitary(rng, n):
    q, r = np.linalg.qr(crandn(rng, n, n))
    return q * (np.diag(r) / np.abs(np.diag(r)))


# -- rate ---------------------------------------------------------------------------

def test_rate_zero_precoder():
    rng = np.random.default_rng(0)
    assert rate(crandn(rng, 2, 4), random_frf(rng, 2, 2), np.zeros((2, 2)), 1.0, 1.0, 2) == 0.0


def test_rate_scalar():
    assert rate(np.array([[1.0 + 0j]]), np.eye(1), np.eye(1), 1.0, 1.0, 1) == pytest.approx(1.0, abs=1e-15)


def test_rate_raises_on_nan():
    with pytest.raises(NumericalError):
        rate(np.array([[np.nan + 0j]]), np.eye(1), np.eye(1), 1.0, 1.0, 1)


def det_rate(h, f_rf, f_bb, pt, s2, ns):
    a = h @ f_rf @ f_bb
    _, logdet = np.linalg.slogdet(np.eye(h.shape[0]) + pt / (s2 * ns) * a @ a.conj().T)
    return logdet / np.log(2)


@settings(max_examples=50)
@given(seeds, st.integers(1, 4), st.integers(1, 4), st.floats(-20, 30))
def test_rate_matches_slogdet_and_sic(seed, n_rf, nr, snr_db):
    rng = np.random.default_rng(seed)
    h = crandn(rng, nr, 2 * n_rf)
    f_rf = random_frf(rng, n_rf, 2)
    f_bb = random_unitary(rng, n_rf)
    pt = 10 ** (snr_db / 10)
    r = rate(h, f_rf, f_bb, pt, 1.0, n_rf)
    assert r == pytest.approx(det_rate(h, f_rf, f_bb, pt, 1.0, n_rf), rel=1e-9, abs=1e-12)
    assert sic_rate(h, f_rf, pt, 1.0, n_rf) == pytest.approx(r, rel=1e-8, abs=1e-12)
    assert r >= 0


def test_sic_single_subarray_and_zero_channel():
    rng = np.random.default_rng(1)
    h = crandn(rng, 3, 4)
    subs = [SubArrayDesign(np.exp(1j * rng.uniform(0, 6, 4)) / 2)]
    f_rf = assemble_frf(subs)
    assert sic_rate(h, subs, 2.0, 1.0, 1) == pytest.approx(rate(h, f_rf, np.eye(1), 2.0, 1.0, 1), rel=1e-14)
    assert sic_rate(np.zeros((3, 4)), subs, 2.0, 1.0, 1) == 0.0


def test_sic_rate_four_subarrays():
    rng = np.random.default_rng(2)
    h = crandn(rng, 4, 16)
    f_rf = random_frf(rng, 4, 4)
    f_bb, _ = digital_precoder(h, f_rf, 4)
    assert sic_rate(h, f_rf, 5.0, 0.1, 4) == pytest.approx(rate(h, f_rf, f_bb, 5.0, 0.1, 4), rel=1e-8)


# -- receive SNR ---------------------------------------------------------------------

def test_receive_snr_unit_ratio():
    h = np.array([[1.0 + 0j]])
    # ||H F||^2 = 1 = sigma^2 N_s / P_t with sigma^2 = 0.5, N_s = 2, P_t = 1
    assert receive_snr(h, np.eye(1), np.eye(1), 1.0, 0.5, 2) == pytest.approx(0.0, abs=1e-12)


def test_receive_snr_zero_channel():
    assert receive_snr(np.zeros((2, 2)), np.eye(2), np.eye(2), 1.0, 1.0, 2) == -math.inf


@settings(max_examples=30)
@given(seeds)
def test_receive_snr_properties(seed):
    rng = np.random.default_rng(seed)
    g, m = crandn(rng, 3, 5), crandn(rng, 5, 8)
    phi = np.exp(1j * rng.uniform(0, 2 * np.pi, 5))
    f_rf = random_frf(rng, 4, 2)
    f_bb = random_unitary(rng, 4)
    h = effective_channel(g, phi, m)
    base = receive_snr(h, f_rf, f_bb, 1.0, 0.1, 4)
    # direct Frobenius oracle
    naive = 0.0
    a = h @ f_rf @ f_bb
    for x in a.ravel():
        naive += abs(x) ** 2
    assert base == pytest.approx(10 * math.log10(naive / (0.1 * 4)), abs=1e-10)
    assert receive_snr(h, f_rf, f_bb, 10.0, 0.1, 4) == pytest.approx(base + 10, abs=1e-10)
    h_rot = effective_channel(g, phi * np.exp(1j * rng.uniform(0, 6)), m)
    assert receive_snr(h_rot, f_rf, f_bb, 1.0, 0.1, 4) == pytest.approx(base, abs=1e-10)
    assert receive_snr(h, f_rf, f_bb @ random_unitary(rng, 4), 1.0, 0.1, 4) == pytest.approx(base, abs=1e-10)
    assert receive_snr_linear(h, f_rf, f_bb, 1.0, 0.1, 4) == pytest.approx(10 ** (base / 10), rel=1e-12)


# -- power and EE ------------------------------------------------------------------------

def test_twin_power_default():
    expected = 1 + 0.2 + 4 * 0.3 + 64 * 0.001 + 32 * 0.052 + 32 * 0.010 + 64 * 0.001
    assert total_power(SystemConfig(), Variant.TWIN) == pytest.approx(expected, abs=1e-12)
    assert expected == pytest.approx(4.512, abs=1e-12)


def test_single_resolution_power():
    cfg = SystemConfig()
    assert total_power(cfg, "HIGH") == pytest.approx(1 + 0.2 + 1.2 + 0.064 + 64 * 0.052)
    assert total_power(cfg, "LOW") == pytest.approx(1 + 0.2 + 1.2 + 0.064 + 64 * 0.010)


@given(st.floats(0, 500), st.floats(0, 500), st.floats(0, 20))
def test_high_minus_twin_identity(p_h, p_l, p_sw):
    cfg = SystemConfig()
    pm = PowerModel(p_high=p_h, p_low=p_l, p_switch=p_sw)
    diff = total_power(cfg, Variant.HIGH, pm) - total_power(cfg, Variant.TWIN, pm)
    expected_mw = cfg.nt * (p_h - (p_h + p_l) / 2) - cfg.nt * p_sw
    assert diff == pytest.approx(expected_mw * 1e-3, abs=1e-9)


def test_zero_device_power():
    pm = PowerModel(0, 0, 0, 0, 0, 0)
    for v in Variant:
        assert total_power(SystemConfig(pt_dbm=20), v, pm) == pytest.approx(0.1)


@given(st.floats(1e-6, 100), st.floats(1e-6, 100), st.sampled_from(list(Variant)))
def test_power_affine_in_pt(p1, p2, variant):
    cfg = SystemConfig()
    d = total_power(cfg, variant, pt=p2) - total_power(cfg, variant, pt=p1)
    assert d == pytest.approx(p2 - p1, abs=1e-9)


def test_power_ordering():
    cfg = SystemConfig()
    assert total_power(cfg, "HIGH") > total_power(cfg, "TWIN") > total_power(cfg, "LOW")


def test_power_model_validation():
    with pytest.raises(ValueError):
        PowerModel(p_rf=-1)


def test_energy_efficiency():
    assert energy_efficiency(0.0, 3.0) == 0.0
    assert energy_efficiency(4.512 * 2, 4.512) == pytest.approx(2.0)
    for bad in (0.0, -1.0):
        with pytest.raises(ValueError):
            energy_efficiency(1.0, bad)


# -- water-filling -----------------------------------------------------------------------

def water_filling_reference(gains, total, noise):
    """Classic active-set water-filling: drop the weakest mode until every
    remaining allocation is positive."""
    g = np.sort(np.asarray(gains, float))[::-1]
    order = np.argsort(-np.asarray(gains, float), kind="stable")
    k = int(np.sum(g > 0))
    while k > 0:
        mu = (total + np.sum(noise / g[:k])) / k
        p = mu - noise / g[:k]
        if p[-1] > 0:
            break
        k -= 1
    out = np.zeros(len(g))
    out[order[:k]] = p
    return out


@settings(max_examples=80)
@given(st.lists(st.floats(1e-4, 1e3), min_size=1, max_size=6), st.floats(1e-3, 1e3), st.floats(1e-3, 10))
def test_water_filling_matches_reference(gains, total, noise):
    p = water_filling(gains, total, noise)
    ref = water_filling_reference(gains, total, noise)
    assert np.all(p >= 0)
    assert p.sum() == pytest.approx(total, rel=1e-9)
    cap = np.sum(np.log2(1 + p * np.array(gains) / noise))
    cap_ref = np.sum(np.log2(1 + ref * np.array(gains) / noise))
    assert cap == pytest.approx(cap_ref, rel=1e-9, abs=1e-12)


def test_shannon_single_mode():
    h = np.array([[3.0 + 0j, 0], [0, 0]])
    assert shannon_limit(h, 2.0, 0.5, 2) == pytest.approx(math.log2(1 + 2.0 * 9 / 0.5), rel=1e-12)


def test_equal_singular_values_uniform():
    p = water_filling([2.0, 2.0, 2.0], 3.0, 1.0)
    np.testing.assert_allclose(p, [1.0, 1.0, 1.0], atol=1e-12)


def test_shannon_truncates_to_streams():
    h = np.diag([3.0, 2.0, 1.0]).astype(complex)
    one = shannon_limit(h, 1.0, 1.0, 1)
    assert one == pytest.approx(math.log2(1 + 9.0), rel=1e-12)
    assert shannon_limit(h, 1.0, 1.0, 3) >= one


@settings(max_examples=60)
@given(seeds, st.floats(-10, 40))
def test_shannon_dominates_designed_rate(seed, pt_db):
    rng = np.random.default_rng(seed)
    h = crandn(rng, 4, 16)
    f_rf = random_frf(rng, 4, 4)
    f_bb, _ = digital_precoder(h, f_rf, 4)
    pt = 10 ** (pt_db / 10)
    assert rate(h, f_rf, f_bb, pt, 1.0, 4) <= shannon_limit(h, pt, 1.0, 4) + 1e-6


def test_metrics_record_dict():
    rec = MetricsRecord(1.0, 2.0, 3.0, 1 / 3, 4.0, True)
    assert rec.to_dict()["rank_deficient_flag"] is True
