"""Built-in causal statistical detectors behind a fit/score contract.

Four kinds share one interface:

* ``first_diff``: absolute first-order difference, no training state.
* ``ar``: ridge least-squares autoregression over the preceding m points,
  scored by absolute prediction error.
* ``sub_lof``: local outlier factor of the length-m window ending at t
  against the store of all training windows.
* ``matrix_profile``: minimum z-normalized Euclidean distance between the
  window ending at t and the training window store (AB-join).

Scores are causal: the score at t depends only on observations at or
before t, and every test timestamp gets a finite score (positions without
enough history score 0). Windows never cross series boundaries: training
windows are drawn within each pool separately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigError, InsufficientTrainingData, LengthMismatch

KINDS = ("ar", "first_diff", "sub_lof", "matrix_profile")

# Store-based detectors memorize per-series history, which conflicts with
# pooled training; bench refuses them under all_in_one/zero_shot by default.
POOLING_UNSUPPORTED = frozenset({"sub_lof", "matrix_profile"})

_CONST_STD = 1e-12
_LRD_EPS = 1e-10


@dataclass(frozen=True)
class DetectorConfig:
    kind: str
    window: int = 32
    neighbors: int = 10  # sub_lof only
    ridge: float = 1e-4  # ar only
    name: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown detector kind {self.kind!r}")
        if self.kind == "ar" and self.window < 1:
            raise ConfigError("ar needs window >= 1")
        if self.kind in ("sub_lof", "matrix_profile") and self.window < 2:
            raise ConfigError(f"{self.kind} needs window >= 2")
        if self.neighbors < 1:
            raise ConfigError("neighbors must be >= 1")
        if self.ridge < 0:
            raise ConfigError("ridge must be >= 0")

    @property
    def display_name(self) -> str:
        return self.name if self.name else self.kind

    @property
    def supports_pooling(self) -> bool:
        return self.kind not in POOLING_UNSUPPORTED


def _usable_pools(pools: Sequence[np.ndarray], min_len: int) -> list[np.ndarray]:
    usable = [np.asarray(p, dtype=np.float64) for p in pools]
    usable = [p for p in usable if len(p) >= min_len]
    if not usable:
        raise InsufficientTrainingData(
            f"no training pool of length >= {min_len}"
        )
    return usable


def _fit_ar(config: DetectorConfig, pools: Sequence[np.ndarray]) -> np.ndarray:
    """Solve (X'X + ridge*I) w = X'y over windows drawn within each pool.

    Feature rows are [1, x_{t-m}, ..., x_{t-1}] targeting x_t, so the
    returned vector is [bias, w_1, ..., w_m].
    """
    m = config.window
    xtx = np.zeros((m + 1, m + 1))
    xty = np.zeros(m + 1)
    for pool in _usable_pools(pools, m + 1):
        windows = sliding_window_view(pool, m)[:-1]  # each row precedes its target
        targets = pool[m:]
        ones = np.ones((len(windows), 1))
        x = np.hstack([ones, windows])
        xtx += x.T @ x
        xty += x.T @ targets
    if config.ridge > 0:
        xtx = xtx + config.ridge * np.eye(m + 1)
    try:
        coef = np.linalg.solve(xtx, xty)
    except np.linalg.LinAlgError:
        coef, *_ = np.linalg.lstsq(xtx, xty, rcond=None)
    return coef


def _stack_windows(pools: Sequence[np.ndarray], m: int) -> np.ndarray:
    parts = [sliding_window_view(pool, m) for pool in _usable_pools(pools, m + 1)]
    return np.ascontiguousarray(np.vstack(parts))


def _znorm_rows(rows: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    means = rows.mean(axis=1)
    stds = rows.std(axis=1)
    safe = np.where(stds < _CONST_STD, 1.0, stds)
    z = (rows - means[:, None]) / safe[:, None]
    return z, means, stds


def _knn_indices(dists: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k smallest entries, ties broken by index."""
    part = np.argpartition(dists, k - 1)[:k]
    order = np.lexsort((part, dists[part]))
    return part[order]


@dataclass
class FittedDetector:
    """Immutable learned state; safe to share across concurrent score calls."""

    config: DetectorConfig
    coef: np.ndarray | None = None  # ar: [bias, w_1..w_m]
    store: np.ndarray | None = None  # sub_lof / matrix_profile windows
    store_k: int = 0  # sub_lof: effective neighbor count
    store_kdist: np.ndarray | None = None  # sub_lof
    store_lrd: np.ndarray | None = None  # sub_lof
    store_z: np.ndarray | None = None  # matrix_profile, non-constant rows
    store_const_means: np.ndarray | None = field(default=None)  # matrix_profile

    @property
    def kind(self) -> str:
        return self.config.kind

    @property
    def store_size(self) -> int:
        return 0 if self.store is None else len(self.store)

    def count_parameters(self) -> int:
        """Learned parameter count; window stores are memory, not parameters."""
        return len(self.coef) if self.coef is not None else 0


def fit(config: DetectorConfig, pools: Sequence[Sequence[float]]) -> FittedDetector:
    """Fit on label-free training pools (one array per series region)."""
    arrays = [np.asarray(p, dtype=np.float64) for p in pools]
    if config.kind == "first_diff":
        return FittedDetector(config=config)
    if config.kind == "ar":
        return FittedDetector(config=config, coef=_fit_ar(config, arrays))
    store = _stack_windows(arrays, config.window)
    if config.kind == "matrix_profile":
        z, means, stds = _znorm_rows(store)
        const = stds < _CONST_STD
        return FittedDetector(
            config=config,
            store=store,
            store_z=np.ascontiguousarray(z[~const]),
            store_const_means=means[const],
        )
    # sub_lof: precompute each stored window's k-distance and local
    # reachability density (neighbors within the store exclude the point
    # itself; ties break by index; lrd uses the 1e-10 regularizer so exact
    # duplicates stay finite and score 1).
    n = len(store)
    k = min(config.neighbors, n - 1)
    if k < 1:
        raise InsufficientTrainingData("sub_lof needs at least two training windows")
    kdist = np.empty(n)
    neighbors = np.empty((n, k), dtype=np.int64)
    block = max(1, (1 << 22) // max(n, 1))
    sq_norms = np.einsum("ij,ij->i", store, store)
    for lo in range(0, n, block):
        hi = min(lo + block, n)
        d2 = (
            sq_norms[lo:hi, None]
            - 2.0 * (store[lo:hi] @ store.T)
            + sq_norms[None, :]
        )
        np.maximum(d2, 0.0, out=d2)
        d = np.sqrt(d2)
        for i in range(lo, hi):
            row = d[i - lo]
            row[i] = np.inf  # exclude self
            nb = _knn_indices(row, k)
            neighbors[i] = nb
            kdist[i] = row[nb[-1]]
    reach = np.maximum(kdist[neighbors], _pairwise_rows(store, neighbors))
    lrd = 1.0 / (reach.mean(axis=1) + _LRD_EPS)
    return FittedDetector(
        config=config,
        store=store,
        store_k=k,
        store_kdist=kdist,
        store_lrd=lrd,
    )


def _pairwise_rows(store: np.ndarray, neighbors: np.ndarray) -> np.ndarray:
    diffs = store[:, None, :] - store[neighbors]
    return np.sqrt(np.einsum("ijk,ijk->ij", diffs, diffs))


def count_parameters(fitted: FittedDetector) -> int:
    return fitted.count_parameters()


def _lof_of_window(fitted: FittedDetector, window: np.ndarray) -> float:
    store = fitted.store
    diff = store - window
    d = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    nb = _knn_indices(d, fitted.store_k)
    reach = np.maximum(fitted.store_kdist[nb], d[nb])
    lrd_q = 1.0 / (reach.mean() + _LRD_EPS)
    return float(fitted.store_lrd[nb].mean() / lrd_q)


def _profile_of_window(fitted: FittedDetector, window: np.ndarray) -> float:
    mean = window.mean()
    std = window.std()
    best = math.inf
    if std < _CONST_STD:
        # constant query: all comparisons fall back to mean offsets
        all_means = fitted.store.mean(axis=1)
        return float(np.abs(all_means - mean).min())
    if fitted.store_z is not None and len(fitted.store_z):
        z = (window - mean) / std
        diff = fitted.store_z - z
        d = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        best = float(d.min())
    if fitted.store_const_means is not None and len(fitted.store_const_means):
        best = min(best, float(np.abs(fitted.store_const_means - mean).min()))
    return best


def score(
    fitted: FittedDetector,
    context: Sequence[float],
    test: Sequence[float],
) -> np.ndarray:
    """One finite causal score per test point.

    ``context`` supplies the observations preceding the test region (the
    series' train + valid prefix under every schema). Positions whose
    window would reach before the first observation score 0.
    """
    ctx = np.asarray(context, dtype=np.float64)
    tst = np.asarray(test, dtype=np.float64)
    if ctx.ndim != 1 or tst.ndim != 1:
        raise LengthMismatch("context and test must be 1-d")
    c = len(ctx)
    n = len(tst)
    hist = np.concatenate([ctx, tst])
    out = np.zeros(n)
    kind = fitted.kind

    if kind == "first_diff":
        if len(hist) > 1:
            d = np.abs(np.diff(hist))
            start = max(0, 1 - c)  # first test point scores 0 only without context
            out[start:] = d[c + start - 1 :]
        return out

    if kind == "ar":
        m = fitted.config.window
        if len(hist) > m:
            windows = sliding_window_view(hist, m)[:-1]
            preds = windows @ fitted.coef[1:] + fitted.coef[0]
            resid = np.abs(hist[m:] - preds)
            start = max(0, m - c)
            out[start:] = resid[c + start - m :]
        return out

    m = fitted.config.window
    scorer = _lof_of_window if kind == "sub_lof" else _profile_of_window
    for j in range(n):
        t_abs = c + j
        if t_abs + 1 < m:
            continue  # not enough history for a full window
        window = hist[t_abs - m + 1 : t_abs + 1]
        out[j] = scorer(fitted, window)
    return out
