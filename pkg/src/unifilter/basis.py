"""Homophily, orthonormal, heterophily and merged (UniBasis) signal bases.

Every builder works column by column on an ``n x d`` feature matrix; the
columns never interact, so all per-column reductions are computed with
``einsum`` over the node axis and the result does not depend on ``d``.
Long bases can be consumed lazily through the ``iter_*`` generators.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from .errors import ConfigurationError, DimensionError, NumericalError
from .graph import Graph, PropagationConfig, propagation_matrix

KINDS = ("homophily", "orthonormal", "heterophily", "unibasis")
RADICAND_TOL = 1e-9
DEFAULT_THETA_CAP = math.pi / 2 - 1e-3


@dataclass(frozen=True)
class BasisConfig:
    K: int = 10
    h_hat: float = 0.5
    tau: float = 0.5
    theta_cap: float = DEFAULT_THETA_CAP
    breakdown_tol: float = 1e-10
    reorthogonalize: bool = False

    def __post_init__(self):
        if self.K < 0:
            raise ConfigurationError(f"K must be nonnegative, got {self.K}")
        if not 0.0 <= self.h_hat <= 1.0:
            raise ConfigurationError(f"h_hat must lie in [0, 1], got {self.h_hat}")
        if not 0.0 <= self.tau <= 1.0:
            raise ConfigurationError(f"tau must lie in [0, 1], got {self.tau}")
        if not 0.0 <= self.theta_cap < math.pi / 2:
            raise ConfigurationError(f"theta_cap must lie in [0, pi/2), got {self.theta_cap}")

    @property
    def theta(self) -> float:
        """Target pairwise angle ``(1 - h_hat) pi / 2``, capped below ``pi / 2``."""
        return min((1.0 - self.h_hat) * math.pi / 2, self.theta_cap)


@dataclass
class BasisSet:
    """``K + 1`` hop slices of shape ``n x d`` plus construction metadata.

    For ``kind == "homophily"`` the slices are the raw powers ``P^k x``;
    :meth:`normalized` gives the unit-column version used when merging.
    ``flags`` records zero input columns and Krylov breakdowns.
    """

    kind: str
    hops: list
    theta: float | None = None
    tau: float | None = None
    h_used: float | None = None
    flags: dict = field(default_factory=dict)
    propagation: PropagationConfig = field(default_factory=PropagationConfig)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown basis kind {self.kind!r}")
        if not self.hops:
            raise ValueError("a basis needs at least one hop")
        shape = self.hops[0].shape
        for k, s in enumerate(self.hops):
            if s.shape != shape or s.ndim != 2:
                raise DimensionError(f"hop {k} has shape {s.shape}, expected {shape}")

    @property
    def K(self) -> int:
        return len(self.hops) - 1

    @property
    def n(self) -> int:
        return self.hops[0].shape[0]

    @property
    def d(self) -> int:
        return self.hops[0].shape[1]

    def stacked(self) -> np.ndarray:
        """Hops as one ``(K + 1) x n x d`` array."""
        return np.stack(self.hops)

    def normalized(self) -> "BasisSet":
        return BasisSet(
            kind=self.kind,
            hops=[_unit_columns(s) for s in self.hops],
            theta=self.theta,
            tau=self.tau,
            h_used=self.h_used,
            flags=dict(self.flags),
            propagation=self.propagation,
        )

    def manifest(self) -> dict:
        return {
            "kind": self.kind,
            "K": self.K,
            "n": self.n,
            "d": self.d,
            "theta": self.theta,
            "tau": self.tau,
            "h_used": self.h_used,
            "flags": _jsonable_flags(self.flags),
            "propagation": {
                "self_loops": self.propagation.self_loops,
                "isolated_node_policy": self.propagation.isolated_node_policy,
            },
        }

    def save(self, out_dir) -> Path:
        """Write ``hop_XXXX.txt`` per hop, then ``manifest.json`` last.

        The manifest marks a complete export; a directory without one was
        interrupted mid-write.
        """
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        manifest_path = out / "manifest.json"
        if manifest_path.exists():
            manifest_path.unlink()
        width = max(4, len(str(self.K)))
        files = []
        for k, s in enumerate(self.hops):
            name = f"hop_{k:0{width}d}.txt"
            np.savetxt(out / name, s, fmt="%.17g")
            files.append(name)
        meta = self.manifest()
        meta["files"] = files
        tmp = out / "manifest.json.tmp"
        tmp.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        os.replace(tmp, manifest_path)
        return manifest_path

    @classmethod
    def load(cls, out_dir) -> "BasisSet":
        out = Path(out_dir)
        meta = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
        hops = [np.loadtxt(out / name, ndmin=2) for name in meta["files"]]
        flags = meta.get("flags", {})
        if "breakdown" in flags:
            flags["breakdown"] = {int(c): h for c, h in flags["breakdown"].items()}
        prop = meta.get("propagation", {})
        return cls(
            kind=meta["kind"],
            hops=hops,
            theta=meta.get("theta"),
            tau=meta.get("tau"),
            h_used=meta.get("h_used"),
            flags=flags,
            propagation=PropagationConfig(**prop),
        )


def _jsonable_flags(flags: dict) -> dict:
    out = {}
    for key, val in flags.items():
        if isinstance(val, dict):
            out[key] = {str(k): v for k, v in sorted(val.items())}
        else:
            out[key] = val
    return out


def _unit_columns(s: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(s, axis=0)
    out = np.zeros_like(s)
    nz = norm > 0
    out[:, nz] = s[:, nz] / norm[nz]
    return out


def _as_matrix(g: Graph, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] != g.n:
        raise DimensionError(f"feature matrix must have {g.n} rows, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NumericalError("feature matrix contains NaN or Inf")
    return x


def _colnorm(a: np.ndarray) -> np.ndarray:
    return np.sqrt(np.einsum("ij,ij->j", a, a))


def _coldot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.einsum("ij,ij->j", a, b)


def iter_homophily(g: Graph, x, K: int, prop: PropagationConfig | None = None) -> Iterator[np.ndarray]:
    """Yield ``x, Px, ..., P^K x`` one propagation at a time."""
    if K < 0:
        raise ConfigurationError(f"K must be nonnegative, got {K}")
    P = propagation_matrix(g, prop or PropagationConfig())
    cur = _as_matrix(g, x).copy()
    yield cur
    for _ in range(K):
        cur = P @ cur
        yield cur


def homophily_basis(g: Graph, x, K: int, prop: PropagationConfig | None = None) -> BasisSet:
    prop = prop or PropagationConfig()
    X = _as_matrix(g, x)
    hops = list(iter_homophily(g, X, K, prop))
    zero_cols = np.flatnonzero(_colnorm(X) == 0).tolist()
    return BasisSet("homophily", hops, flags={"zero_columns": zero_cols}, propagation=prop)


class _Krylov:
    """Three-term recurrence state shared by the heterophily and orthonormal builders.

    With ``reorthogonalize`` every new vector is additionally projected off
    all earlier ones (classical Gram-Schmidt, repeated once if needed). That costs
    ``O(K^2 n)`` time and ``O(K n)`` memory per column, but keeps the
    vectors orthonormal to machine precision for long runs, where the bare
    recurrence drifts. The second pass runs only when the first one removed
    a large part of the vector.
    """

    def __init__(self, g, x, prop, breakdown_tol, reorthogonalize=False, K=0):
        self.P = propagation_matrix(g, prop)
        X = _as_matrix(g, x)
        norm = _colnorm(X)
        self.live = norm > 0
        self.zero_columns = np.flatnonzero(~self.live).tolist()
        u0 = np.zeros_like(X)
        u0[:, self.live] = X[:, self.live] / norm[self.live]
        self.u0 = u0
        self.v_prev = u0.copy()
        self.v_prev2 = np.zeros_like(X)
        self.tmp = np.empty_like(X)
        self.tol = breakdown_tol
        self.breakdown = {}
        self.store = None
        if reorthogonalize:
            # (d, K + 1, n): each column's history is one contiguous block
            self.store = np.zeros((X.shape[1], K + 1, X.shape[0]))
            self.store[:, 0, :] = u0.T

    def step(self, k: int) -> np.ndarray:
        """Advance to ``v_k``. The returned array is reused two steps later."""
        v = self.P @ self.v_prev
        a1 = _coldot(v, self.v_prev)
        a2 = _coldot(v, self.v_prev2)
        # in place: fresh n-length temporaries cost more than the arithmetic
        tmp = self.tmp
        np.multiply(self.v_prev, a1, out=tmp)
        v -= tmp
        np.multiply(self.v_prev2, a2, out=tmp)
        v -= tmp
        if self.store is not None:
            hist = self.store[:, :k, :]
            w = np.ascontiguousarray(v.T)[:, :, None]
            before = np.linalg.norm(w, axis=1)
            w -= np.matmul(hist.transpose(0, 2, 1), np.matmul(hist, w))
            # second pass only when cancellation was severe (Kahan-Parlett)
            if np.any(np.linalg.norm(w, axis=1) < 0.7 * before):
                w -= np.matmul(hist.transpose(0, 2, 1), np.matmul(hist, w))
            v = w[:, :, 0].T
        norm = _colnorm(v)
        bad = self.live & (norm < self.tol)
        for j in np.flatnonzero(bad):
            self.breakdown.setdefault(int(j), k)
        ok = self.live & ~bad
        out = self.v_prev2
        out.fill(0.0)
        np.divide(v, np.where(ok, norm, 1.0), out=out, where=ok[None, :])
        self.v_prev2, self.v_prev = self.v_prev, out
        if self.store is not None:
            self.store[:, k, :] = out.T
        return out

    def flags(self) -> dict:
        return {"zero_columns": self.zero_columns, "breakdown": dict(self.breakdown)}


def iter_orthonormal(g: Graph, x, K: int, prop=None, breakdown_tol=1e-10,
                     reorthogonalize=False, _state=None):
    """Yield the three-term-recurrence vectors ``v_0, ..., v_K``."""
    if K < 0:
        raise ConfigurationError(f"K must be nonnegative, got {K}")
    st = _state or _Krylov(g, x, prop or PropagationConfig(), breakdown_tol, reorthogonalize, K)
    yield st.u0.copy()
    for k in range(1, K + 1):
        yield st.step(k).copy()


def orthonormal_basis(g: Graph, x, K: int, prop=None, breakdown_tol=1e-10,
                      reorthogonalize=False) -> BasisSet:
    prop = prop or PropagationConfig()
    if K < 0:
        raise ConfigurationError(f"K must be nonnegative, got {K}")
    st = _Krylov(g, x, prop, breakdown_tol, reorthogonalize, K)
    hops = list(iter_orthonormal(g, x, K, prop, _state=st))
    return BasisSet("orthonormal", hops, flags=st.flags(), propagation=prop)


def iter_heterophily(g: Graph, x, cfg: BasisConfig, prop=None, _state=None) -> Iterator[np.ndarray]:
    """Yield heterophily basis vectors ``u_0, ..., u_K`` column-wise.

    Every pair of output unit vectors meets at angle ``cfg.theta``. Each
    step costs one sparse product plus a fixed number of length-``n``
    vector operations.
    """
    theta = cfg.theta
    cos_t = math.cos(theta)
    if cos_t <= 0.0:
        raise ConfigurationError(f"cos(theta) must be positive, got theta={theta}")
    st = _state or _Krylov(g, x, prop or PropagationConfig(), cfg.breakdown_tol, cfg.reorthogonalize, cfg.K)
    live = st.live
    u_prev = st.u0.copy()
    s = u_prev.copy()
    tmp = np.empty_like(s)
    yield u_prev
    for k in range(1, cfg.K + 1):
        v = st.step(k)
        u = s / k
        ratio = _coldot(s, u_prev) / (k * cos_t)
        radicand = ratio * ratio - ((k - 1) * cos_t + 1.0) / k
        neg = live & (radicand < 0.0)
        if np.any(neg):
            # after a breakdown the angle recurrence no longer applies; clamp only
            broken = np.zeros_like(live)
            broken[list(st.breakdown)] = True
            strict = neg & ~broken
            if np.any(strict):
                worst = int(np.flatnonzero(strict)[np.argmin(radicand[strict])])
                if radicand[worst] < -RADICAND_TOL:
                    raise NumericalError(
                        f"negative radicand {radicand[worst]:.3e} at hop {k}, column {worst}",
                        hop=k,
                        column=worst,
                    )
            radicand = np.where(neg, 0.0, radicand)
        if theta == 0.0:
            # exact collapse; sqrt would amplify rounding noise in the radicand
            radicand = np.zeros_like(radicand)
        t = np.sqrt(np.where(live, radicand, 0.0))
        np.multiply(v, t, out=tmp)
        u += tmp
        norm = _colnorm(u)
        np.divide(u, np.where(live, norm, 1.0), out=u, where=live[None, :])
        s += u
        u_prev = u
        yield u


def heterophily_basis(g: Graph, x, cfg: BasisConfig, prop=None) -> BasisSet:
    prop = prop or PropagationConfig()
    st = _Krylov(g, x, prop, cfg.breakdown_tol, cfg.reorthogonalize, cfg.K)
    hops = list(iter_heterophily(g, x, cfg, prop, _state=st))
    return BasisSet(
        "heterophily", hops, theta=cfg.theta, h_used=cfg.h_hat, flags=st.flags(), propagation=prop
    )


def iter_unibasis(g: Graph, x, cfg: BasisConfig, prop=None) -> Iterator[np.ndarray]:
    """Yield ``tau * unit(P^k x) + (1 - tau) * u_k`` for ``k = 0..K``."""
    prop = prop or PropagationConfig()
    tau = cfg.tau
    homo = iter_homophily(g, x, cfg.K, prop)
    hetero = iter_heterophily(g, x, cfg, prop)
    for p, u in zip(homo, hetero):
        yield tau * _unit_columns(p) + (1.0 - tau) * u


def uni_basis(g: Graph, x, cfg: BasisConfig, prop=None) -> BasisSet:
    prop = prop or PropagationConfig()
    X = _as_matrix(g, x)
    st = _Krylov(g, X, prop, cfg.breakdown_tol, cfg.reorthogonalize, cfg.K)
    hetero = iter_heterophily(g, X, cfg, prop, _state=st)
    homo = iter_homophily(g, X, cfg.K, prop)
    tau = cfg.tau
    hops = [tau * _unit_columns(p) + (1.0 - tau) * u for p, u in zip(homo, hetero)]
    flags = st.flags()
    flags["parents"] = {
        "homophily": {"K": cfg.K, "normalized": True},
        "heterophily": {"K": cfg.K, "theta": cfg.theta, "h_used": cfg.h_hat},
    }
    return BasisSet(
        "unibasis", hops, theta=cfg.theta, tau=tau, h_used=cfg.h_hat, flags=flags, propagation=prop
    )


def build_basis(kind: str, g: Graph, x, cfg: BasisConfig, prop=None) -> BasisSet:
    """Dispatch on ``kind`` (one of :data:`KINDS`)."""
    if kind == "homophily":
        return homophily_basis(g, x, cfg.K, prop)
    if kind == "orthonormal":
        return orthonormal_basis(g, x, cfg.K, prop, cfg.breakdown_tol, cfg.reorthogonalize)
    if kind == "heterophily":
        return heterophily_basis(g, x, cfg, prop)
    if kind == "unibasis":
        return uni_basis(g, x, cfg, prop)
    raise ConfigurationError(f"unknown basis kind {kind!r}; choose from {KINDS}")


def iter_basis(kind: str, g: Graph, x, cfg: BasisConfig, prop=None) -> Iterator[np.ndarray]:
    """Lazy counterpart of :func:`build_basis` for long bases."""
    if kind == "homophily":
        return iter_homophily(g, x, cfg.K, prop)
    if kind == "orthonormal":
        return iter_orthonormal(g, x, cfg.K, prop, cfg.breakdown_tol, cfg.reorthogonalize)
    if kind == "heterophily":
        return iter_heterophily(g, x, cfg, prop)
    if kind == "unibasis":
        return iter_unibasis(g, x, cfg, prop)
    raise ConfigurationError(f"unknown basis kind {kind!r}; choose from {KINDS}")
