"""Spectral chaos indicators: Brody fit, gap ratio, eigenvector IPR."""
from __future__ import annotations

import numpy as np
from numpy.polynomial import Polynomial
from scipy.optimize import minimize_scalar
from scipy.special import gamma

BETA_BOUNDS = (0.0, 1.5)


class DegenerateSpectrumError(ValueError):
    def __init__(self, message, count):
        super().__init__(message)
        self.count = count


def brody_b(beta: float) -> float:
    return gamma((beta + 2) / (beta + 1)) ** (beta + 1)


def brody_pdf(s, beta: float):
    s = np.asarray(s, dtype=float)
    b = brody_b(beta)
    return (beta + 1) * b * s**beta * np.exp(-b * s ** (beta + 1))


def brody_sample(beta: float, size: int, rng) -> np.ndarray:
    """Inverse-CDF draws from the Brody distribution (unit mean)."""
    u = rng.random(size)
    return (-np.log1p(-u) / brody_b(beta)) ** (1 / (beta + 1))


def _neg_loglike(beta, s, log_s):
    b1 = beta + 1
    b = brody_b(beta)
    return -(s.size * np.log(b1 * b) + beta * log_s.sum() - b * np.sum(s**b1))


def brody_fit(unfolded_spacings) -> float:
    """Maximum-likelihood Brody parameter on [0, 1.5]; spacings are rescaled to unit mean."""
    s = np.asarray(unfolded_spacings, dtype=float)
    if s.size < 200:
        raise ValueError(f"brody_fit needs at least 200 spacings, got {s.size}")
    if np.any(s < 0):
        raise ValueError("spacings must be non-negative")
    if np.ptp(s) == 0:
        raise ValueError("degenerate spacings (all equal)")
    s = s / s.mean()
    s = s[s > 0]
    log_s = np.log(s)
    res = minimize_scalar(_neg_loglike, bounds=BETA_BOUNDS, args=(s, log_s), method="bounded",
                          options={"xatol": 1e-10})
    if not res.success:
        raise RuntimeError(f"Brody likelihood did not converge: {res.message}")
    return float(res.x)


def unfold_spectrum(energies, degree: int = 7, keep: float = 0.6) -> np.ndarray:
    """Unfolded spacings from a polynomial fit to the level staircase, central fraction only."""
    E = np.sort(np.asarray(energies, dtype=float))
    n = E.size
    staircase = np.arange(1, n + 1)
    poly = Polynomial.fit(E, staircase, degree)
    lo = int(round(n * (1 - keep) / 2))
    hi = n - lo
    unfolded = poly(E[lo:hi])
    return np.diff(unfolded)


def gap_ratio(energies, tol: float = 1e-12) -> float:
    """Mean of r_n = min(s_n, s_n+1) / max(s_n, s_n+1)."""
    E = np.asarray(energies, dtype=float)
    if E.size < 50:
        raise ValueError(f"gap_ratio needs at least 50 levels, got {E.size}")
    if np.any(np.diff(E) < 0):
        raise ValueError("levels must be sorted ascending")
    s = np.diff(E)
    degenerate = int(np.sum(s <= tol))
    if degenerate:
        raise DegenerateSpectrumError(f"{degenerate} degenerate level pairs", degenerate)
    r = np.minimum(s[:-1], s[1:]) / np.maximum(s[:-1], s[1:])
    return float(r.mean())


def ipr(eigenvectors, tol: float = 1e-12) -> float:
    """Spectrum-averaged participation number 1 / sum_j |psi_j|^4 (columns are eigenvectors)."""
    Q = np.asarray(eigenvectors)
    norms = np.sum(np.abs(Q) ** 2, axis=0)
    if np.any(np.abs(norms - 1) > tol):
        raise ValueError("eigenvector columns are not normalized")
    return float(np.mean(1.0 / np.sum(np.abs(Q) ** 4, axis=0)))
