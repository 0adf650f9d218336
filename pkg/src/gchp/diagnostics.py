"""Empirical analyses that motivate a self-exciting arrival model.

Three views of an event series: counts over fixed windows (clustering
shows up as overdispersion), the inter-arrival distribution compared
against five candidate families, and the correlation between counts in
lagged windows.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import TooFewSamples
from .hawkes import EventSeries

__all__ = [
    "WindowCounts",
    "DistributionFit",
    "LagCorrelation",
    "FAMILIES",
    "window_counts",
    "fit_interarrival_distributions",
    "interarrival_cdf_table",
    "autocorrelation",
]

FAMILIES = ("exponential", "gamma", "weibull", "reciprocal", "wald")

_SHAPE_CAP = (1e-3, 1e3)


@dataclass(frozen=True)
class WindowCounts:
    tau: float
    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64).copy()
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)


def window_counts(events: EventSeries, tau: float) -> WindowCounts:
    """Events per consecutive window of length tau; trailing partial dropped."""
    if not (tau > 0):
        raise ValueError("tau must be positive")
    n_windows = int(np.floor(events.horizon / tau))
    if n_windows == 0:
        return WindowCounts(tau=tau, counts=np.empty(0, dtype=np.int64))
    idx = np.floor(events.times / tau).astype(np.int64)
    idx = idx[idx < n_windows]
    return WindowCounts(tau=tau, counts=np.bincount(idx, minlength=n_windows))


@dataclass(frozen=True)
class DistributionFit:
    family: str
    params: dict
    ks_distance: float
    dist: object  # frozen scipy distribution


def _ks_distance(sample: np.ndarray, cdf) -> float:
    x = np.sort(sample)
    n = x.size
    f = cdf(x)
    upper = np.max(np.arange(1, n + 1) / n - f)
    lower = np.max(f - np.arange(0, n) / n)
    return float(max(upper, lower))


def _clip_shape(value: float) -> float:
    return float(np.clip(value, *_SHAPE_CAP))


def _mle(dist, x: np.ndarray):
    # scipy emits RuntimeWarnings on near-degenerate samples; the caller
    # falls back to capped shapes in that case
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return dist.fit(x, floc=0)


def _fit_family(family: str, x: np.ndarray) -> tuple[dict, object]:
    if family == "exponential":
        scale = float(x.mean())
        return {"scale": scale}, stats.expon(scale=scale)
    if family == "gamma":
        try:
            shape, _, scale = _mle(stats.gamma, x)
        except Exception:
            shape, scale = _SHAPE_CAP[1], x.mean() / _SHAPE_CAP[1]
        if not (_SHAPE_CAP[0] <= shape <= _SHAPE_CAP[1]):
            shape = _clip_shape(shape)
            scale = x.mean() / shape  # scale MLE given the clipped shape
        return {"shape": float(shape), "scale": float(scale)}, stats.gamma(shape, scale=scale)
    if family == "weibull":
        try:
            shape, _, scale = _mle(stats.weibull_min, x)
        except Exception:
            shape, scale = _SHAPE_CAP[1], float(np.mean(x))
        if not (_SHAPE_CAP[0] <= shape <= _SHAPE_CAP[1]):
            shape = _clip_shape(shape)
            scale = float(np.mean(x**shape) ** (1.0 / shape))
        return {"shape": float(shape), "scale": float(scale)}, stats.weibull_min(shape, scale=scale)
    if family == "reciprocal":
        # log-uniform on the sample support; its MLE is the sample range
        lo = float(np.min(x))
        hi = float(np.max(x))
        if hi <= lo:
            hi = float(np.nextafter(lo, np.inf))
        return {"low": lo, "high": hi}, stats.loguniform(lo, hi)
    if family == "wald":
        try:
            shape, _, scale = _mle(stats.invgauss, x)
        except Exception:
            shape, scale = _SHAPE_CAP[1], float(np.mean(x)) / _SHAPE_CAP[1]
        if not (_SHAPE_CAP[0] <= shape <= _SHAPE_CAP[1]):
            shape = _clip_shape(shape)
        return {"shape": float(shape), "scale": float(scale)}, stats.invgauss(shape, scale=scale)
    raise ValueError(f"unknown family {family!r}")


def fit_interarrival_distributions(events: EventSeries,
                                   min_samples: int = 10) -> list[DistributionFit]:
    """Fit each candidate family by maximum likelihood; rank by sup-norm
    distance between the empirical and fitted CDFs (smallest first).

    Zero gaps (tie-jitter artifacts) are excluded from the sample.
    """
    gaps = np.diff(events.times)
    gaps = gaps[gaps > 0]
    if gaps.size < min_samples:
        raise TooFewSamples(
            f"need at least {min_samples} inter-arrival samples, got {gaps.size}"
        )
    fits = []
    for family in FAMILIES:
        params, dist = _fit_family(family, gaps)
        fits.append(DistributionFit(family=family, params=params,
                                    ks_distance=_ks_distance(gaps, dist.cdf),
                                    dist=dist))
    return sorted(fits, key=lambda f: f.ks_distance)


def interarrival_cdf_table(events: EventSeries, fits: list[DistributionFit],
                           points: int = 200) -> tuple[list[str], np.ndarray]:
    """Plot-ready table: x grid, empirical CDF, then one column per family."""
    gaps = np.diff(events.times)
    gaps = np.sort(gaps[gaps > 0])
    grid = np.quantile(gaps, np.linspace(0.0, 1.0, points))
    empirical = np.searchsorted(gaps, grid, side="right") / gaps.size
    columns = [grid, empirical] + [fit.dist.cdf(grid) for fit in fits]
    header = ["x", "empirical"] + [fit.family for fit in fits]
    return header, np.column_stack(columns)


@dataclass(frozen=True)
class LagCorrelation:
    delta: float
    corr: float  # nan when insufficient data
    n_pairs: int
    reason: str | None = None


def autocorrelation(events: EventSeries, tau: float,
                    deltas: list[float], min_pairs: int = 30) -> list[LagCorrelation]:
    """Correlation between counts on [t, t+tau) and [t+tau+delta, t+2*tau+delta).

    The anchor t slides in disjoint steps of tau from the first event, so
    the result is exactly invariant under time-origin shifts of the whole
    series (for lags delta >= -tau).  Lags without at least ``min_pairs``
    valid pairs (or with a degenerate count variance) are reported with
    corr = nan and a reason instead of failing the batch.
    """
    if not (tau > 0):
        raise ValueError("tau must be positive")
    times = events.times
    horizon = events.horizon
    origin = float(times[0]) if times.size else 0.0
    out = []
    for delta in deltas:
        anchors = origin + np.arange(0.0, horizon - origin + tau, tau)
        valid = (anchors + tau + delta >= 0) & (anchors + 2 * tau + delta <= horizon)
        anchors = anchors[valid]
        if anchors.size < min_pairs:
            out.append(LagCorrelation(delta=delta, corr=np.nan, n_pairs=int(anchors.size),
                                      reason=f"only {anchors.size} pairs"))
            continue
        first = (np.searchsorted(times, anchors + tau, side="left")
                 - np.searchsorted(times, anchors, side="left"))
        second = (np.searchsorted(times, anchors + 2 * tau + delta, side="left")
                  - np.searchsorted(times, anchors + tau + delta, side="left"))
        if first.std() == 0 or second.std() == 0:
            out.append(LagCorrelation(delta=delta, corr=np.nan, n_pairs=int(anchors.size),
                                      reason="zero count variance"))
            continue
        corr = float(np.corrcoef(first, second)[0, 1])
        out.append(LagCorrelation(delta=delta, corr=corr, n_pairs=int(anchors.size)))
    return out
