"""Spectral signal frequency, angle diagnostics and spectrum profiles."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np

from .errors import DimensionError, NumericalError
from .graph import Graph


def _edge_energy_and_mass(g: Graph, x: np.ndarray):
    u, v = g.edges()
    diff = x[u] - x[v]
    energy = np.einsum("e...,e...->...", diff, diff)
    mass = np.einsum("i,i...,i...->...", g.degrees.astype(np.float64), x, x)
    return energy, mass


def signal_frequency(g: Graph, x) -> float:
    """Degree-normalized Dirichlet energy of a node signal, in ``[0, 1]``.

    ``f(x) = sum_{(u,v) in E} (x_u - x_v)^2 / (2 sum_u d_u x_u^2)``.
    The value is invariant to rescaling ``x``.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (g.n,):
        raise DimensionError(f"signal must have shape ({g.n},), got {x.shape}")
    if not np.any(x):
        raise ValueError("signal frequency is undefined for the zero signal")
    # rescale first so squares of tiny or huge signals stay representable
    x = x / np.max(np.abs(x))
    energy, mass = _edge_energy_and_mass(g, x)
    if mass <= 0.0:
        raise NumericalError("signal is supported only on isolated nodes")
    return float(energy / (2.0 * mass))


def column_frequencies(g: Graph, X) -> np.ndarray:
    """:func:`signal_frequency` of every column; NaN for unusable columns."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != g.n:
        raise DimensionError(f"signal matrix must have {g.n} rows, got shape {X.shape}")
    scale = np.max(np.abs(X), axis=0)
    ok = scale > 0
    Xs = np.zeros_like(X)
    Xs[:, ok] = X[:, ok] / scale[ok]
    energy, mass = _edge_energy_and_mass(g, Xs)
    out = np.full(X.shape[1], np.nan)
    usable = ok & (mass > 0)
    out[usable] = energy[usable] / (2.0 * mass[usable])
    return out


def expected_frequency_regular(n: int, dot: float) -> float:
    """Closed form ``(n + 1 - 2 dot^2) / (4 (n - 1))`` for random regular graphs.

    ``dot`` is the inner product of the unit signal with the normalized
    all-ones vector. See :func:`expected_frequency_regular_exact` for the
    expectation that Monte Carlo sampling actually converges to.
    """
    n, dot = _check_regular_args(n, dot)
    return (n + 1 - 2.0 * dot * dot) / (4.0 * (n - 1))


def expected_frequency_regular_exact(n: int, dot: float) -> float:
    """Expected frequency of a fixed unit signal over uniform random regular graphs.

    Every node pair is an edge with probability ``k / (n - 1)``, and
    ``sum_{u<v} (x_u - x_v)^2 = n - (sum_u x_u)^2`` for a unit signal, so
    the expectation is ``n (1 - dot^2) / (2 (n - 1))`` regardless of ``k``.
    """
    n, dot = _check_regular_args(n, dot)
    return n * (1.0 - dot * dot) / (2.0 * (n - 1))


def _check_regular_args(n, dot):
    if n < 2:
        raise ValueError(f"need at least 2 nodes, got n={n}")
    if abs(dot) > 1.0 + 1e-12:
        raise ValueError(f"|dot| must not exceed 1, got {dot}")
    return int(n), float(dot)


class AngleReport(NamedTuple):
    """Consecutive-slice angles in degrees plus per-step skipped column counts."""

    degrees: np.ndarray
    skipped: np.ndarray


def _slices(basis) -> Iterable[np.ndarray]:
    hops = getattr(basis, "hops", basis)
    for s in hops:
        s = np.asarray(s, dtype=np.float64)
        yield s[:, None] if s.ndim == 1 else s


def consecutive_angles(basis, zero_tol: float = 0.0) -> AngleReport:
    """Angles between consecutive hops, averaged over feature columns.

    ``basis`` is a :class:`~unifilter.basis.BasisSet` or any iterable of
    ``n x d`` slices, so very long bases can be streamed without being
    stored. Columns where either slice has norm ``<= zero_tol`` are left
    out of that step's average and counted in ``skipped``.
    """
    degrees, skipped = [], []
    prev = prev_norm = None
    for step, cur in enumerate(_slices(basis)):
        norm = np.linalg.norm(cur, axis=0)
        if prev is not None:
            if cur.shape != prev.shape:
                raise DimensionError(f"hop {step} has shape {cur.shape}, expected {prev.shape}")
            ok = (norm > zero_tol) & (prev_norm > zero_tol)
            if not np.any(ok):
                raise NumericalError(f"hops {step - 1} and {step} have no nonzero column in common", hop=step)
            cos = np.einsum("ij,ij->j", prev[:, ok], cur[:, ok]) / (prev_norm[ok] * norm[ok])
            ang = np.degrees(np.arccos(np.clip(cos, -1.0, 1.0)))
            degrees.append(float(ang.mean()))
            skipped.append(int(ok.size - np.count_nonzero(ok)))
        prev, prev_norm = cur, norm
    if prev is None or not degrees:
        raise ValueError("need at least two hops to measure angles")
    return AngleReport(np.asarray(degrees), np.asarray(skipped, dtype=np.int64))


@dataclass(frozen=True)
class SpectrumProfile:
    """Mean frequency of each hop's slice paired with that hop's learned weight."""

    frequencies: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=np.float64)
        w = np.asarray(self.weights, dtype=np.float64)
        if f.shape != w.shape or f.ndim != 1:
            raise DimensionError("frequencies and weights must be equal-length sequences")
        if np.any((f < 0) | (f > 1 + 1e-9)):
            raise NumericalError("frequencies must lie in [0, 1]")
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "weights", w)

    @property
    def n_hops(self) -> int:
        return int(self.frequencies.size)

    def to_records(self) -> list[dict]:
        return [
            {"hop": k, "frequency": float(f), "weight": float(w)}
            for k, (f, w) in enumerate(zip(self.frequencies, self.weights))
        ]

    def to_json(self) -> str:
        return json.dumps(self.to_records(), indent=2)

    @classmethod
    def from_records(cls, records) -> "SpectrumProfile":
        records = sorted(records, key=lambda r: r["hop"])
        if [r["hop"] for r in records] != list(range(len(records))):
            raise ValueError("spectrum records must cover hops 0..K without gaps")
        return cls([r["frequency"] for r in records], [r["weight"] for r in records])


def spectrum_profile(g: Graph, basis, weights) -> SpectrumProfile:
    """Per-hop mean :func:`column_frequencies`, paired with the hop weights.

    Zero columns are ignored in the mean; a hop with no usable column is
    an error.
    """
    weights = np.asarray(weights, dtype=np.float64).ravel()
    hops = list(_slices(basis))
    if weights.size != len(hops):
        raise DimensionError(f"{weights.size} weights for {len(hops)} hops")
    freqs = []
    for k, s in enumerate(hops):
        f = column_frequencies(g, s)
        if np.all(np.isnan(f)):
            raise NumericalError(f"hop {k} has no column with nonzero degree-weighted norm", hop=k)
        freqs.append(float(np.nanmean(f)))
    return SpectrumProfile(np.asarray(freqs), weights)
