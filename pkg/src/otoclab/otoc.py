"""
Infinite-temperature OTOCs under unitary map dynamics.

With rho = I/N and W_t = U^dag^t W U^t:

    C(t) = Tr([W_t, V]^dag [W_t, V]) / N
    F(t) = Tr(W_t^dag V^dag W_t V) / N
    D(t) = Tr(V^dag (W^dag W)_t V) / N
    I(t) = Tr(W_t^dag V^dag V W_t) / N

and C = D + I - 2 Re F.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import sparse

from .io import fmt, write_json
from .qmap import CAT, DenseMap, IntMatrix2, cat_matrix_power

CSV_HEADER = ("t", "C", "ReF", "ImF", "D", "I")


@dataclass
class OtocSeries:
    times: np.ndarray
    C: np.ndarray
    F: np.ndarray
    D: np.ndarray
    I: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times)
        n = self.times.size
        for name in ("C", "F", "D", "I"):
            if np.asarray(getattr(self, name)).shape != (n,):
                raise ValueError(f"{name} must have one value per time")

    def __len__(self):
        return self.times.size

    def decomposition_error(self) -> float:
        return float(np.max(np.abs(self.C - (self.D + self.I - 2 * self.F.real))))

    def window(self, t_a, t_b) -> np.ndarray:
        return (self.times >= t_a) & (self.times <= t_b)

    def rows(self):
        for k in range(len(self)):
            yield (self.times[k].item(), self.C[k], self.F[k].real, self.F[k].imag, self.D[k], self.I[k])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for row in self.rows():
                w.writerow([fmt(x) for x in row])

    @classmethod
    def from_csv(cls, path, meta: Optional[dict] = None) -> "OtocSeries":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:, 1], data[:, 2] + 1j * data[:, 3], data[:, 4], data[:, 5],
                   meta or {})


def _evolver(U):
    if hasattr(U, "conjugate") and hasattr(U, "N"):
        return U
    return DenseMap(np.asarray(U))


def _check_dims(N, *mats):
    for m in mats:
        if m.shape != (N, N):
            raise ValueError(f"dimension mismatch: expected {(N, N)}, got {m.shape}")


def heisenberg_evolve(U, W: np.ndarray, t: int) -> np.ndarray:
    """(U^dag)^t W U^t by t successive conjugations."""
    if t < 0:
        raise ValueError("t must be non-negative")
    ev = _evolver(U)
    W = np.asarray(W)
    _check_dims(ev.N, W)
    out = W.astype(complex, copy=True)
    for _ in range(t):
        out = ev.conjugate(out)
    return out


def _mul(A, B, A_diag, B_diag):
    if A_diag is not None:
        return A_diag[:, None] * B
    if B_diag is not None:
        return A * B_diag[None, :]
    if sparse.issparse(A):
        return A @ B
    if sparse.issparse(B):
        return (B.T @ A.T).T
    return A @ B


def _diagonal(M) -> Optional[np.ndarray]:
    d = np.diag(M)
    return d if np.count_nonzero(M - np.diag(d)) == 0 else None


def otoc_series(U, W: np.ndarray, V: np.ndarray, t_max: int, meta: Optional[dict] = None
                ) -> OtocSeries:
    """OTOC components for t = 0..t_max.

    ``U`` is a QuantizedMap (FFT conjugation) or a dense unitary matrix.
    """
    if t_max < 0:
        raise ValueError("t_max must be non-negative")
    ev = _evolver(U)
    N = ev.N
    W = np.asarray(W, dtype=complex)
    V = np.asarray(V, dtype=complex)
    _check_dims(N, W, V)
    Vd = _diagonal(V)
    if Vd is None and np.count_nonzero(V) <= 4 * N:
        V = sparse.csr_array(V)

    n = t_max + 1
    C = np.empty(n)
    F = np.empty(n, dtype=complex)
    D = np.empty(n)
    I = np.empty(n)
    Wt = W.copy()
    for t in range(n):
        if t:
            Wt = ev.conjugate(Wt)
        A = _mul(Wt, V, None, Vd)  # W_t V
        B = _mul(V, Wt, Vd, None)  # V W_t
        X = A - B
        C[t] = np.vdot(X, X).real / N
        F[t] = np.vdot(B, A) / N
        D[t] = np.vdot(A, A).real / N
        I[t] = np.vdot(B, B).real / N
        if not (np.isfinite(C[t]) and np.isfinite(F[t])):
            raise FloatingPointError(f"non-finite OTOC value at t={t}")
    return OtocSeries(np.arange(n), C, F, D, I, dict(meta or {}))


def cat_otoc_analytic(N: int, t: int, M: IntMatrix2 = CAT) -> Tuple[float, float]:
    """Exact (C, F) for W = Q, V = P under the unperturbed linear cat map."""
    if t < 0:
        raise ValueError("t must be non-negative")
    a = cat_matrix_power(M, t, modulus=2 * N).a
    return math.sin(math.pi * a / N) ** 2, math.cos(2 * math.pi * a / N) / 4


def cat_otoc_analytic_series(N: int, t_max: int, M: IntMatrix2 = CAT) -> Tuple[np.ndarray, np.ndarray]:
    vals = [cat_otoc_analytic(N, t, M) for t in range(t_max + 1)]
    return np.array([v[0] for v in vals]), np.array([v[1] for v in vals])


@dataclass(frozen=True)
class EhrenfestEstimate:
    t_E: float
    lam: float
    N: int


def ehrenfest_time(lam: float, N: int) -> EhrenfestEstimate:
    if lam <= 0:
        raise ValueError("Lyapunov exponent must be positive")
    if N < 2:
        raise ValueError("N must be >= 2")
    return EhrenfestEstimate(math.log(N) / lam, lam, N)


def default_growth_window(t_E: float) -> Tuple[int, int]:
    return 2, int(math.floor(t_E)) - 1


def default_decay_window(t_E: float) -> Tuple[int, int]:
    start = int(math.ceil(t_E)) + 1
    return start, start + 14


def _loglinear(times, values, window, what: str) -> Tuple[float, float]:
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    t_a, t_b = window
    if t_b <= t_a:
        raise ValueError("degenerate fit window")
    mask = (times >= t_a) & (times <= t_b)
    if mask.sum() < 4:
        raise ValueError("fit window needs at least 4 points")
    y = values[mask]
    if np.any(y <= 0):
        raise ValueError(f"non-positive {what} in fit window")
    x = times[mask]
    logy = np.log(y)
    slope, intercept = np.polyfit(x, logy, 1)
    resid = logy - (slope * x + intercept)
    ss_tot = np.sum((logy - logy.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(r2)


def fit_growth_rate(series: OtocSeries, window) -> Tuple[float, float]:
    """Least-squares slope of ln C(t) over the window, and r^2."""
    return _loglinear(series.times, series.C, window, "C")


def fit_decay_rate(F_magnitude, window, times: Optional[Sequence[float]] = None
                   ) -> Tuple[float, float]:
    """Slope of ln|F(t)|; the implied resonance modulus is exp(rate / 2)."""
    F_magnitude = np.abs(np.asarray(F_magnitude))
    if times is None:
        times = np.arange(F_magnitude.size)
    return _loglinear(times, F_magnitude, window, "|F|")


def write_metadata(path, meta: dict) -> None:
    write_json(path, meta)
