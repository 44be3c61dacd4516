"""Geometric multi-path channels between BS, RIS and user UPAs."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .config import ConfigError, SystemConfig, derive_geometry, path_loss_db


@dataclass(frozen=True)
class PathSet:
    """Per-path complex gains and departure/arrival angles of one link."""

    gains: np.ndarray
    azimuth_dep: np.ndarray
    elev_dep: np.ndarray
    azimuth_arr: np.ndarray
    elev_arr: np.ndarray

    @property
    def n_paths(self) -> int:
        return len(self.gains)


@dataclass(frozen=True)
class ChannelRealization:
    """One draw of the BS-RIS matrix ``m_matrix`` (N_RIS x N_t) and the
    RIS-user matrix ``g_matrix`` (N_r x N_RIS)."""

    m_matrix: np.ndarray
    g_matrix: np.ndarray
    a_br_db: float
    a_ru_db: float
    paths_br: PathSet
    paths_ru: PathSet

    @property
    def nris(self) -> int:
        return self.m_matrix.shape[0]


def upa_steering(azimuth, elevation, w, h, spacing=0.5):
    """Unit-norm UPA response.

    Element (m, n), m < w horizontal and n < h vertical, sits at flat index
    ``m * h + n`` and has phase 2*pi*spacing*(m sin(az) sin(el) + n cos(el)).
    """
    if w < 1 or h < 1:
        raise ValueError("array dimensions must be >= 1")
    m = np.arange(w)[:, None]
    n = np.arange(h)[None, :]
    phase = 2 * np.pi * spacing * (m * np.sin(azimuth) * np.sin(elevation) + n * np.cos(elevation))
    return (np.exp(1j * phase) / np.sqrt(w * h)).reshape(-1)


def _draw_paths(rng: np.random.Generator, n_paths: int) -> PathSet:
    gains = (rng.standard_normal(n_paths) + 1j * rng.standard_normal(n_paths)) / np.sqrt(2)
    az_d = rng.uniform(-np.pi, np.pi, n_paths)
    el_d = rng.uniform(-np.pi / 2, np.pi / 2, n_paths)
    az_a = rng.uniform(-np.pi, np.pi, n_paths)
    el_a = rng.uniform(-np.pi / 2, np.pi / 2, n_paths)
    return PathSet(gains, az_d, el_d, az_a, el_a)


def link_matrix(paths: PathSet, tx_shape, rx_shape, loss_db, spacing=0.5):
    """sqrt(N_tx N_rx / L) sqrt(A) sum_l g_l a_rx a_tx^H for one link."""
    if paths.n_paths < 1:
        raise ConfigError("path_count", "a link needs at least one path")
    n_tx = tx_shape[0] * tx_shape[1]
    n_rx = rx_shape[0] * rx_shape[1]
    out = np.zeros((n_rx, n_tx), dtype=complex)
    for k in range(paths.n_paths):
        a_rx = upa_steering(paths.azimuth_arr[k], paths.elev_arr[k], *rx_shape, spacing)
        a_tx = upa_steering(paths.azimuth_dep[k], paths.elev_dep[k], *tx_shape, spacing)
        out += paths.gains[k] * np.outer(a_rx, a_tx.conj())
    scale = np.sqrt(n_tx * n_rx / paths.n_paths) * np.sqrt(10.0 ** (loss_db / 10.0))
    return scale * out


def draw_channel(cfg: SystemConfig, rng: np.random.Generator) -> ChannelRealization:
    d_br, d_ru = derive_geometry(cfg)
    a_br = path_loss_db(d_br)
    a_ru = path_loss_db(d_ru)
    paths_br = _draw_paths(rng, cfg.n_paths_br)
    paths_ru = _draw_paths(rng, cfg.n_paths_ru)
    spacing = cfg.element_spacing_wavelengths
    bs = (cfg.nt_w, cfg.nt_h)
    ris = (cfg.nris_w, cfg.nris_h)
    ue = (cfg.nr_w, cfg.nr_h)
    m_matrix = link_matrix(paths_br, bs, ris, a_br, spacing)
    g_matrix = link_matrix(paths_ru, ris, ue, a_ru, spacing)
    return ChannelRealization(m_matrix, g_matrix, a_br, a_ru, paths_br, paths_ru)


# ---------------------------------------------------------------------------
# fixture files
# ---------------------------------------------------------------------------

def _pack(a: np.ndarray) -> dict:
    a = np.atleast_1d(np.asarray(a, dtype=complex))
    flat = np.empty(2 * a.size)
    flat[0::2] = a.real.ravel()
    flat[1::2] = a.imag.ravel()
    return {"shape": list(a.shape), "data": flat.tolist()}


def _unpack(d: dict) -> np.ndarray:
    flat = np.asarray(d["data"], dtype=float)
    return (flat[0::2] + 1j * flat[1::2]).reshape(d["shape"])


def _pack_paths(p: PathSet) -> dict:
    return {
        "gains": _pack(p.gains),
        "azimuth_dep": p.azimuth_dep.tolist(),
        "elev_dep": p.elev_dep.tolist(),
        "azimuth_arr": p.azimuth_arr.tolist(),
        "elev_arr": p.elev_arr.tolist(),
    }


def _unpack_paths(d: dict) -> PathSet:
    return PathSet(
        _unpack(d["gains"]),
        np.asarray(d["azimuth_dep"]),
        np.asarray(d["elev_dep"]),
        np.asarray(d["azimuth_arr"]),
        np.asarray(d["elev_arr"]),
    )


def channel_to_json(chan: ChannelRealization) -> str:
    """Serialise a realization; complex arrays are stored row-major with
    real and imaginary parts interleaved, shapes in a header field."""
    doc = {
        "format": "twinris-channel",
        "version": 1,
        "m_matrix": _pack(chan.m_matrix),
        "g_matrix": _pack(chan.g_matrix),
        "a_br_db": chan.a_br_db,
        "a_ru_db": chan.a_ru_db,
        "paths_br": _pack_paths(chan.paths_br),
        "paths_ru": _pack_paths(chan.paths_ru),
    }
    return json.dumps(doc)


def channel_from_json(text: str) -> ChannelRealization:
    doc = json.loads(text)
    if doc.get("format") != "twinris-channel":
        raise ValueError("not a channel dump")
    return ChannelRealization(
        _unpack(doc["m_matrix"]),
        _unpack(doc["g_matrix"]),
        float(doc["a_br_db"]),
        float(doc["a_ru_db"]),
        _unpack_paths(doc["paths_br"]),
        _unpack_paths(doc["paths_ru"]),
    )
