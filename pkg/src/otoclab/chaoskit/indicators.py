"""OTOC-based chaos quantifiers from the long-time fluctuations of C(t)."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

MIN_XI_SAMPLES = 16


class Degenerate:
    """Marker returned when an indicator is undefined (e.g. a constant series)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "DEGENERATE"

    def __str__(self):
        return "degenerate"

    def __bool__(self):
        return False


DEGENERATE = Degenerate()


def is_degenerate(x) -> bool:
    return x is DEGENERATE


def _windowed(series, window, times) -> np.ndarray:
    series = np.asarray(series, dtype=float)
    if window is None:
        return series
    if times is None:
        times = np.arange(series.size)
    times = np.asarray(times, dtype=float)
    t_a, t_b = window
    return series[(times >= t_a) & (times <= t_b)]


def power_distribution(x: np.ndarray) -> Optional[np.ndarray]:
    """Normalized one-sided power spectrum of the mean-subtracted signal, zero bin dropped."""
    x = x - x.mean()
    power = np.abs(np.fft.rfft(x)[1:]) ** 2
    total = power.sum()
    if total <= 0 or not np.isfinite(total):
        return None
    return power / total


def xi_otoc(series, window: Optional[Tuple[float, float]] = None, times=None):
    """Participation number of the windowed OTOC power spectrum.

    Rectangular window, no taper.  Returns DEGENERATE for a constant signal.
    """
    x = _windowed(series, window, times)
    if x.size < MIN_XI_SAMPLES:
        raise ValueError(f"xi_otoc needs at least {MIN_XI_SAMPLES} samples, got {x.size}")
    p = power_distribution(x)
    if p is None:
        return DEGENERATE
    # ptp guards against round-off "spectra" of a numerically constant signal
    if np.ptp(x) <= 1e-14 * max(1.0, np.abs(x).max()):
        return DEGENERATE
    return float(1.0 / np.sum(p**2))


def sigma_otoc(series, window: Optional[Tuple[float, float]] = None, times=None) -> float:
    """Population standard deviation of the windowed series."""
    x = _windowed(series, window, times)
    if x.size < 2:
        raise ValueError("sigma_otoc needs at least 2 samples")
    return float(np.std(x))


@dataclass
class IndicatorReport:
    xi_otoc: object
    sigma_otoc: float
    window: Tuple[float, float]
    brody_beta: Optional[float] = None
    mean_gap_ratio: Optional[float] = None
    ipr: Optional[float] = None
    meta: dict = field(default_factory=dict)

    @property
    def inverse_sigma(self):
        return DEGENERATE if self.sigma_otoc == 0 else 1.0 / self.sigma_otoc

    def as_dict(self) -> dict:
        d = asdict(self)
        d["xi_otoc"] = None if is_degenerate(self.xi_otoc) else self.xi_otoc
        return d


def indicator_report(series, window=None, times=None, energies: Optional[Sequence[float]] = None,
                     vectors: Optional[np.ndarray] = None, meta: Optional[dict] = None
                     ) -> IndicatorReport:
    from .spectral import brody_fit, gap_ratio, ipr, unfold_spectrum

    if times is None and hasattr(series, "times"):
        times = series.times
    values = series.C if hasattr(series, "C") else series
    values = np.asarray(values, dtype=float)
    if window is None:
        t = np.arange(values.size) if times is None else np.asarray(times)
        window = (float(t[0]), float(t[-1]))
    xi = xi_otoc(values, window, times)
    sigma = sigma_otoc(values, window, times)
    report = IndicatorReport(xi, sigma, tuple(window),
                             meta={"xi_spectrum": "mean-subtracted rectangular window, "
                                                  "one-sided, zero bin excluded",
                                   **(meta or {})})
    if energies is not None:
        E = np.sort(np.asarray(energies, dtype=float))
        report.mean_gap_ratio = gap_ratio(E)
        report.brody_beta = brody_fit(unfold_spectrum(E))
    if vectors is not None:
        report.ipr = ipr(vectors)
    return report
