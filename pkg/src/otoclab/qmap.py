"""
Classical torus maps, their Lyapunov exponents, and their quantization.

Conventions (phase-space points are ordered (q, p) everywhere):

    cat       p' = p + q - 2 pi K sin(2 pi q),   q' = q + p' + 2 pi K sin(2 pi p')
    standard  p' = p + (K / 2 pi) sin(2 pi q),   q' = q + p'
    harper    p' = p + K sin(2 pi q),            q' = q - K sin(2 pi p')

all taken mod 1.  Quantized maps are split-step unitaries

    U = F^dag diag(e^{-i 2 pi N T(p/N)}) F diag(e^{-i 2 pi N V(q/N)})

in the position basis, where F is the DFT with kernel exp(-2 pi i p q / N) / sqrt(N)
and hbar_eff = 1 / (2 pi N).  The kick V(q) is applied first, matching the
classical update order.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

MAP_KINDS = ("cat", "standard", "harper")

CAT_MATRIX = ((2, 1), (1, 1))

CONVENTIONS = {
    "cat": "p' = p + q - 2*pi*K*sin(2*pi*q); q' = q + p' + 2*pi*K*sin(2*pi*p') (mod 1)",
    "standard": "p' = p + K/(2*pi)*sin(2*pi*q); q' = q + p' (mod 1)",
    "harper": "p' = p + K*sin(2*pi*q); q' = q - K*sin(2*pi*p') (mod 1)",
    "dft": "F[p,q] = exp(-2j*pi*p*q/N)/sqrt(N) (position to momentum)",
    "unitary": "U = F^dag diag(exp(-2j*pi*N*T(p/N))) F diag(exp(-2j*pi*N*V(q/N)))",
}


class ConvergenceWarning(RuntimeWarning):
    pass


def _wrap(x):
    # np.mod(-1e-300, 1.0) rounds to 1.0; fold that back onto 0
    r = np.mod(x, 1.0)
    return np.where(r >= 1.0, 0.0, r)


@dataclass(frozen=True)
class TorusMap:
    """A kicked map of the unit torus.

    ``extra`` is an optional second kick strength used only by the Harper map
    (for the q-update); it defaults to ``K``.
    """

    kind: str
    K: float = 0.0
    extra: Optional[float] = None

    def __post_init__(self):
        if self.kind not in MAP_KINDS:
            raise ValueError(f"unknown map kind {self.kind!r}; expected one of {MAP_KINDS}")
        if self.extra is not None and self.kind != "harper":
            raise ValueError("'extra' kick strength only applies to the harper map")

    @property
    def K2(self) -> float:
        return self.K if self.extra is None else self.extra

    def describe(self) -> dict:
        return {"kind": self.kind, "K": self.K, "extra": self.extra,
                "convention": CONVENTIONS[self.kind]}

    def step(self, q, p):
        """Apply one iteration; works elementwise on arrays."""
        q = np.asarray(q, dtype=float)
        p = np.asarray(p, dtype=float)
        q2, p2 = self._step_unwrapped(q, p)
        return _wrap(q2), _wrap(p2)

    def _step_unwrapped(self, q, p):
        K = self.K
        if self.kind == "cat":
            p2 = p + q - 2 * np.pi * K * np.sin(2 * np.pi * q)
            q2 = q + p2 + 2 * np.pi * K * np.sin(2 * np.pi * p2)
        elif self.kind == "standard":
            p2 = p + K / (2 * np.pi) * np.sin(2 * np.pi * q)
            q2 = q + p2
        else:
            p2 = p + K * np.sin(2 * np.pi * q)
            q2 = q - self.K2 * np.sin(2 * np.pi * p2)
        return q2, p2

    def tangent(self, q, p):
        """Analytic Jacobian d(q', p')/d(q, p); shape (..., 2, 2)."""
        q = np.asarray(q, dtype=float)
        p = np.asarray(p, dtype=float)
        _, p2 = self._step_unwrapped(q, p)
        K = self.K
        # p' = p + f(q), q' = q + g(p') for every kind; det = 1 by construction
        if self.kind == "cat":
            df = 1 - 4 * np.pi**2 * K * np.cos(2 * np.pi * q)
            dg = 1 + 4 * np.pi**2 * K * np.cos(2 * np.pi * p2)
        elif self.kind == "standard":
            df = K * np.cos(2 * np.pi * q)
            dg = np.ones_like(p2)
        else:
            df = 2 * np.pi * K * np.cos(2 * np.pi * q)
            dg = -2 * np.pi * self.K2 * np.cos(2 * np.pi * p2)
        J = np.empty(np.broadcast(q, p).shape + (2, 2))
        J[..., 0, 0] = 1 + dg * df
        J[..., 0, 1] = dg
        J[..., 1, 0] = df
        J[..., 1, 1] = 1.0
        return J

    # potential and kinetic functions of the split-step quantization
    def kick_potential(self, x):
        K = self.K
        if self.kind == "cat":
            return -x**2 / 2 - K * np.cos(2 * np.pi * x)
        if self.kind == "standard":
            return K / (4 * np.pi**2) * np.cos(2 * np.pi * x)
        return K / (2 * np.pi) * np.cos(2 * np.pi * x)

    def kinetic(self, x):
        K = self.K
        if self.kind == "cat":
            return x**2 / 2 - K * np.cos(2 * np.pi * x)
        if self.kind == "standard":
            return x**2 / 2
        return self.K2 / (2 * np.pi) * np.cos(2 * np.pi * x)


def classical_step(tmap: TorusMap, point: Tuple[float, float]) -> Tuple[float, float]:
    q, p = tmap.step(point[0], point[1])
    return float(q), float(p)


def tangent_step(tmap: TorusMap, point: Tuple[float, float]) -> np.ndarray:
    return tmap.tangent(point[0], point[1])


def lyapunov_exponent(tmap, n_iter: int = 10_000, n_samples: int = 100, seed=0,
                      transient: int = 100) -> float:
    """Largest Lyapunov exponent (nats per step), averaged over random initial points.

    ``tmap`` needs ``step(q, p)`` and ``tangent(q, p)`` accepting arrays.  The
    tangent vector is renormalized every step; the first ``transient`` steps
    only align it with the unstable direction and are not accumulated.
    """
    if n_iter < 100:
        raise ValueError("n_iter must be >= 100")
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    q = rng.random(n_samples)
    p = rng.random(n_samples)
    v = rng.normal(size=(n_samples, 2))
    v /= np.linalg.norm(v, axis=1, keepdims=True)

    total = n_iter + transient
    acc = np.zeros(n_samples)
    running = np.empty(n_iter)
    for i in range(total):
        J = tmap.tangent(q, p)
        v = np.einsum("nij,nj->ni", J, v)
        norms = np.linalg.norm(v, axis=1)
        v /= norms[:, None]
        q, p = tmap.step(q, p)
        if i >= transient:
            k = i - transient
            acc += np.log(norms)
            running[k] = acc.mean() / (k + 1)
    lam = float(running[-1])
    drift = abs(lam - running[(3 * n_iter) // 4 - 1])
    if drift > 1e-3:
        warnings.warn(f"Lyapunov estimate not converged: last-quarter drift {drift:.2e}",
                      ConvergenceWarning, stacklevel=2)
    return lam


@dataclass(frozen=True)
class IntMatrix2:
    """Exact 2x2 integer matrix [[a, b], [c, d]]."""

    a: int
    b: int
    c: int
    d: int

    @property
    def det(self) -> int:
        return self.a * self.d - self.b * self.c

    def __matmul__(self, other: "IntMatrix2") -> "IntMatrix2":
        return IntMatrix2(self.a * other.a + self.b * other.c,
                          self.a * other.b + self.b * other.d,
                          self.c * other.a + self.d * other.c,
                          self.c * other.b + self.d * other.d)

    def mod(self, m: int) -> "IntMatrix2":
        return IntMatrix2(self.a % m, self.b % m, self.c % m, self.d % m)

    def apply(self, v: Tuple[int, int]) -> Tuple[int, int]:
        return (self.a * v[0] + self.b * v[1], self.c * v[0] + self.d * v[1])

    def as_tuple(self):
        return ((self.a, self.b), (self.c, self.d))


CAT = IntMatrix2(2, 1, 1, 1)


def cat_matrix_power(M: IntMatrix2, t: int, modulus: Optional[int] = None) -> IntMatrix2:
    """M**t by repeated squaring, exact in Python integers (optionally mod ``modulus``)."""
    if t < 0:
        raise ValueError("t must be non-negative")
    result = IntMatrix2(1, 0, 0, 1)
    base = M if modulus is None else M.mod(modulus)
    while t:
        if t & 1:
            result = result @ base
            if modulus is not None:
                result = result.mod(modulus)
        base = base @ base
        if modulus is not None:
            base = base.mod(modulus)
        t >>= 1
    return result


@dataclass(frozen=True, eq=False)
class QuantizedMap:
    """N x N Floquet unitary of a torus map, stored with its split-step factors.

    ``phase_q`` and ``phase_p`` are the diagonal phase factors applied in the
    position and momentum bases; ``U`` is materialized lazily.
    """

    N: int
    phase_q: np.ndarray
    phase_p: np.ndarray
    source: Optional[TorusMap] = None
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def hbar_eff(self) -> float:
        return 1.0 / (2 * np.pi * self.N)

    @property
    def U(self) -> np.ndarray:
        if "U" not in self._cache:
            N = self.N
            F = dft_matrix(N)
            U = F.conj().T @ (self.phase_p[:, None] * F) * self.phase_q[None, :]
            U.setflags(write=False)
            self._cache["U"] = U
        return self._cache["U"]

    def conjugate(self, W: np.ndarray) -> np.ndarray:
        """U^dag W U via FFTs, O(N^2 log N)."""
        dq, dp = self.phase_q, self.phase_p
        # X -> F W F^dag
        X = np.fft.ifft(np.fft.fft(W, axis=0, norm="ortho"), axis=1, norm="ortho")
        X = dp.conj()[:, None] * X * dp[None, :]
        # X -> F^dag X F
        X = np.fft.fft(np.fft.ifft(X, axis=0, norm="ortho"), axis=1, norm="ortho")
        X = dq.conj()[:, None] * X * dq[None, :]
        return X

    def apply(self, psi: np.ndarray) -> np.ndarray:
        """U @ psi (psi may have trailing columns)."""
        x = self.phase_q.reshape((-1,) + (1,) * (psi.ndim - 1)) * psi
        x = np.fft.fft(x, axis=0, norm="ortho")
        x = self.phase_p.reshape((-1,) + (1,) * (psi.ndim - 1)) * x
        return np.fft.ifft(x, axis=0, norm="ortho")


def dft_matrix(N: int) -> np.ndarray:
    k = np.arange(N)
    return np.exp(-2j * np.pi * np.outer(k, k) / N) / np.sqrt(N)


def quantize(tmap: TorusMap, N: int) -> QuantizedMap:
    if N < 2:
        raise ValueError("Hilbert dimension N must be >= 2")
    x = np.arange(N) / N
    phase_q = np.exp(-2j * np.pi * N * tmap.kick_potential(x))
    phase_p = np.exp(-2j * np.pi * N * tmap.kinetic(x))
    return QuantizedMap(N, phase_q, phase_p, source=tmap)


def matrix_unitary(U: np.ndarray) -> "DenseMap":
    return DenseMap(np.asarray(U))


class DenseMap:
    """Adapter giving a plain unitary matrix the QuantizedMap evolution interface."""

    def __init__(self, U: np.ndarray):
        if U.ndim != 2 or U.shape[0] != U.shape[1]:
            raise ValueError("unitary must be a square matrix")
        self.U = U
        self.N = U.shape[0]

    def conjugate(self, W: np.ndarray) -> np.ndarray:
        return self.U.conj().T @ W @ self.U


@dataclass(frozen=True)
class SchwingerOps:
    N: int
    V_shift: np.ndarray
    U_clock: np.ndarray
    Q: np.ndarray
    P: np.ndarray

    @property
    def tau(self) -> complex:
        return np.exp(1j * np.pi / self.N)


def schwinger_ops(N: int) -> SchwingerOps:
    if N < 2:
        raise ValueError("N must be >= 2")
    q = np.arange(N)
    V = np.zeros((N, N), dtype=complex)
    V[(q + 1) % N, q] = 1.0
    U = np.diag(np.exp(2j * np.pi * q / N))
    Q = (U - U.conj().T) / 2j
    P = (V - V.conj().T) / 2j
    return SchwingerOps(N, V, U, Q, P)


def _tau_power(N: int, k: int) -> complex:
    # tau**k with tau = exp(i pi / N); reduce exactly mod 2N first
    return np.exp(1j * np.pi * (k % (2 * N)) / N)


def translation_op(N: int, xi: Tuple[int, int]) -> np.ndarray:
    """Weyl translation T_xi = V^xi_q U^xi_p tau^(xi_q xi_p)."""
    xq, xp = int(xi[0]), int(xi[1])
    q = np.arange(N)
    T = np.zeros((N, N), dtype=complex)
    # T|q> = tau^(xq*xp + 2*xp*q) |q + xq>
    T[(q + xq) % N, q] = np.exp(1j * np.pi * ((xq * xp + 2 * xp * q) % (2 * N)) / N)
    return T


def symplectic_product(xi, chi) -> int:
    """<xi, chi> = xi_p chi_q - xi_q chi_p, so that T_xi T_chi = tau^<xi, chi> T_{xi + chi}."""
    return int(xi[1]) * int(chi[0]) - int(xi[0]) * int(chi[1])


def translation_fidelity(qmap, xi: Tuple[int, int], M: IntMatrix2 = CAT, t: int = 1) -> float:
    """|Tr(T_{M^t xi}^dag U^t T_xi U^dag^t)| / N; equals 1 for exact covariance.

    Evaluated as |Tr(T_xi^dag U^dag^t T_{M^t xi} U^t)| / N, which is the same
    trace, so the fast Heisenberg conjugation can be used.
    """
    ev = qmap if hasattr(qmap, "conjugate") else DenseMap(np.asarray(qmap))
    N = ev.N
    W = translation_op(N, cat_matrix_power(M, t).apply(xi))
    for _ in range(t):
        W = ev.conjugate(W)
    return float(abs(np.vdot(translation_op(N, xi), W)) / N)


def poincare_section(tmap: TorusMap, n_points: int, n_iter: int, seed=0) -> np.ndarray:
    """Raw orbit point cloud, shape (n_points * n_iter, 2)."""
    rng = np.random.default_rng(seed)
    q, p = rng.random(n_points), rng.random(n_points)
    out = np.empty((n_iter, n_points, 2))
    for i in range(n_iter):
        q, p = tmap.step(q, p)
        out[i, :, 0], out[i, :, 1] = q, p
    return out.reshape(-1, 2)


def ehrenfest_lyapunov_cat() -> float:
    return math.log((3 + math.sqrt(5)) / 2)
