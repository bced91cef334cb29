"""
Random-field Heisenberg spin-1/2 chain in a fixed-magnetization sector.

    H = sum_i S_i . S_{i+1}  +  sum_i h_i S^z_i,   open boundaries,  h_i ~ U[-h, h]

Basis states are integers whose bit i is 1 when site i is up, restricted to
popcount == n_up and sorted ascending.  Infinite-temperature traces run over
the sector only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .otoc import OtocSeries


def disorder_rng(seed: int, realization: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(realization)]))


@dataclass(frozen=True)
class SpinChainModel:
    L: int
    n_up: int
    h: float
    fields: tuple
    seed: Optional[int] = None
    realization: int = 0
    J: float = 1.0

    def __post_init__(self):
        if not 0 <= self.n_up <= self.L:
            raise ValueError(f"invalid sector n_up={self.n_up} for L={self.L}")
        if len(self.fields) != self.L:
            raise ValueError("need one field per site")
        if np.any(np.abs(self.fields) > self.h + 1e-15):
            raise ValueError("fields must lie in [-h, h]")

    @classmethod
    def random(cls, L: int, n_up: int, h: float, seed: int, realization: int = 0,
               J: float = 1.0) -> "SpinChainModel":
        fields = disorder_rng(seed, realization).uniform(-h, h, L)
        return cls(L, n_up, h, tuple(float(x) for x in fields), seed, realization, J)

    @property
    def dim(self) -> int:
        return math.comb(self.L, self.n_up)

    def describe(self) -> dict:
        return {"L": self.L, "n_up": self.n_up, "h": self.h, "seed": self.seed,
                "realization": self.realization, "J": self.J, "boundary": "open",
                "trace": "sector"}


def sector_basis(L: int, n_up: int) -> np.ndarray:
    if not 0 <= n_up <= L:
        raise ValueError(f"invalid sector n_up={n_up} for L={L}")
    states = np.arange(1 << L)
    counts = np.array([bin(s).count("1") for s in range(1 << L)])
    return states[counts == n_up]


def _spins(basis: np.ndarray, L: int) -> np.ndarray:
    """+1/-1 per (state, site)."""
    return 2 * ((basis[:, None] >> np.arange(L)[None, :]) & 1) - 1


def build_hamiltonian(model: SpinChainModel) -> np.ndarray:
    """Sector Hamiltonian as a dense real-symmetric D x D matrix."""
    L = model.L
    basis = sector_basis(L, model.n_up)
    index = {int(s): k for k, s in enumerate(basis)}
    z = _spins(basis, L)
    h = np.asarray(model.fields)
    H = np.zeros((basis.size, basis.size))
    diag = 0.25 * model.J * np.sum(z[:, :-1] * z[:, 1:], axis=1) + 0.5 * z @ h
    H[np.arange(basis.size), np.arange(basis.size)] = diag
    for k, s in enumerate(basis):
        for i in range(L - 1):
            if z[k, i] != z[k, i + 1]:
                flipped = int(s) ^ (0b11 << i)
                H[index[flipped], k] = 0.5 * model.J
    return H


def sigma_z_sector(model: SpinChainModel, site: int) -> np.ndarray:
    if not 0 <= site < model.L:
        raise IndexError(f"site {site} out of range for L={model.L}")
    basis = sector_basis(model.L, model.n_up)
    return np.diag(_spins(basis, model.L)[:, site].astype(float))


def full_hamiltonian(model: SpinChainModel) -> np.ndarray:
    """Dense 2^L Hamiltonian built from Kronecker products (small L only)."""
    L = model.L
    sx = np.array([[0, 1], [1, 0]]) / 2
    sy = np.array([[0, -1j], [1j, 0]]) / 2
    sz = np.array([[1, 0], [0, -1]]) / 2

    def site_op(op, i):
        # bit i of the state index is site i, so site 0 is the rightmost factor
        out = np.array([[1.0]])
        for j in reversed(range(L)):
            out = np.kron(out, op if j == i else np.eye(2))
        return out

    # basis |s> with bit i = 1 meaning up; the kron above uses |0> = up, so flip
    H = np.zeros((1 << L, 1 << L), dtype=complex)
    for i in range(L - 1):
        for op in (sx, sy, sz):
            H += model.J * site_op(op, i) @ site_op(op, i + 1)
    for i in range(L):
        H += model.fields[i] * site_op(sz, i)
    perm = (1 << L) - 1 - np.arange(1 << L)
    return H[np.ix_(perm, perm)]


@dataclass
class Eigensystem:
    energies: np.ndarray
    vectors: np.ndarray


def diagonalize(H: np.ndarray) -> Eigensystem:
    try:
        E, Q = np.linalg.eigh(H)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(f"diagonalization failed: {exc}") from exc
    return Eigensystem(E, Q)


def chain_otoc_curves(model: SpinChainModel, ls: Sequence[int], t_grid: Sequence[float],
                      eig: Optional[Eigensystem] = None) -> dict:
    """F(l, t) = Tr[z0(t) zl z0(t) zl] / D for several separations at once.

    z0(t) is built in the computational basis, where every zl is diagonal, so
    each separation costs O(D^2) per time on top of two shared matrix products:
    Tr[W zl W zl] = sum_ab |W_ab|^2 z_l(a) z_l(b) for Hermitian W.
    """
    ls = [int(l) for l in ls]
    for l in ls:
        if not 1 <= l < model.L:
            raise IndexError(f"separation l={l} out of range for L={model.L}")
    if eig is None:
        eig = diagonalize(build_hamiltonian(model))
    E, Q = eig.energies, eig.vectors
    D = E.size
    basis = sector_basis(model.L, model.n_up)
    z = _spins(basis, model.L).astype(float)
    A = Q.conj().T @ (z[:, 0:1] * Q)  # sigma_0^z in the eigenbasis
    Z = z[:, ls]
    t_grid = np.asarray(t_grid, dtype=float)
    F = np.empty((len(ls), t_grid.size))
    for k, t in enumerate(t_grid):
        Qt = Q * np.exp(1j * E * t)[None, :]
        W = (Qt @ A) @ Qt.conj().T
        G = (W.real**2 + W.imag**2) @ Z
        F[:, k] = np.sum(Z * G, axis=0) / D
    return {l: F[i] for i, l in enumerate(ls)}


def chain_otoc(model: SpinChainModel, l: int, t_grid: Sequence[float],
               eig: Optional[Eigensystem] = None) -> OtocSeries:
    """C(l, t) = 1 - Re Tr[z0(t) zl z0(t) zl] / D with z = sigma^z.

    This is half the double-commutator norm, so every component carries the
    same factor 1/2: D = I = 1/2 and F = Tr[...] / (2 D).  With that scaling
    C = D + I - 2 Re F holds exactly.  F is real because both operators are
    Hermitian.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    F = chain_otoc_curves(model, [l], t_grid, eig)[l]
    half = np.full(t_grid.size, 0.5)
    meta = {"system": "heisenberg-chain", "model": model.describe(), "W": "sigma_z[0]",
            "V": f"sigma_z[{l}]", "l": l,
            "normalization": "all components scaled by 1/2; C = 1 - Re Tr[...]/D"}
    return OtocSeries(t_grid, 1.0 - F, (F / 2).astype(complex), half, half.copy(), meta)


def short_time_prediction(l: int, t):
    """Leading-order C(l, t) ~ t^(2l) / (2 (l!)^2)."""
    if l < 1:
        raise ValueError("l must be >= 1")
    t = np.asarray(t, dtype=float)
    out = t ** (2 * l) / (2 * math.factorial(l) ** 2)
    return float(out) if out.ndim == 0 else out


@dataclass
class ConeReport:
    theta: float
    arrival: dict  # l -> arrival time or None
    velocity: Optional[float]
    monotone: bool
    meta: dict = field(default_factory=dict)


def arrival_time(t_grid, C, theta: float) -> Optional[float]:
    """First time C crosses theta, linearly interpolated; None if never."""
    t_grid = np.asarray(t_grid, dtype=float)
    C = np.asarray(C, dtype=float)
    above = np.nonzero(C >= theta)[0]
    if above.size == 0:
        return None
    k = int(above[0])
    if k == 0:
        return float(t_grid[0])
    c0, c1 = C[k - 1], C[k]
    return float(t_grid[k - 1] + (theta - c0) * (t_grid[k] - t_grid[k - 1]) / (c1 - c0))


def cone_from_curves(t_grid, curves: dict, theta: float) -> ConeReport:
    """Butterfly-cone fit from precomputed C(l, t) curves keyed by l."""
    if not 0 < theta < 1:
        raise ValueError("theta must be in (0, 1)")
    arrival = {int(l): arrival_time(t_grid, C, theta) for l, C in sorted(curves.items())}
    hits = [(l, t) for l, t in arrival.items() if t is not None]
    velocity = None
    if len(hits) >= 2:
        ls = np.array([h[0] for h in hits], dtype=float)
        ts = np.array([h[1] for h in hits])
        velocity = float(np.polyfit(ts, ls, 1)[0])
    times = [t for _, t in hits]
    monotone = all(b > a for a, b in zip(times, times[1:]))
    return ConeReport(theta, arrival, velocity, monotone)


def butterfly_cone(model: SpinChainModel, t_grid, theta: float = 0.5) -> ConeReport:
    eig = diagonalize(build_hamiltonian(model))
    F = chain_otoc_curves(model, range(1, model.L), t_grid, eig)
    curves = {l: 1.0 - f for l, f in F.items()}
    report = cone_from_curves(t_grid, curves, theta)
    report.meta = model.describe()
    return report
