"""Configuration state, discrete free energy and its gradient.

Particles carry equal mass ``h_N = 1/(N+1)`` and sit at strictly increasing
positions. The free energy is

    E(X) = -sum_i log(X_{i+1} - X_i) + chi h_N sum_{i != j} log|X_i - X_j|

and the dynamics is its euclidean gradient flow ``dX/dt = -grad E(X)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

RUNG_TOL = 1e-12


class OrderingError(ValueError):
    """Positions are not strictly increasing."""


class SingularityError(ArithmeticError):
    """A gap underflowed so that the flow is no longer representable."""

    def __init__(self, message: str, pair: tuple[int, int]):
        super().__init__(message)
        self.pair = pair


class RungError(ValueError):
    """chi lies on, or outside, the rung interval an operation requires."""


def check_ordered(x: np.ndarray) -> np.ndarray:
    """Return the consecutive gaps of `x`, raising if any is not positive."""
    if not np.all(np.isfinite(x)):
        raise OrderingError("positions must be finite")
    gaps = np.diff(x)
    if gaps.size and not np.all(gaps > 0):
        i = int(np.argmin(gaps))
        raise OrderingError(
            f"positions not strictly increasing at indices {i + 1},{i + 2}: "
            f"gap {gaps[i]!r}")
    return gaps


@dataclass(frozen=True)
class ParticleState:
    """Ordered particle positions together with the sensitivity ``chi``.

    The mass ``h_N`` is derived from the particle count and never stored
    independently.
    """

    positions: np.ndarray
    chi: float

    def __post_init__(self):
        x = np.array(self.positions, dtype=float)
        if x.ndim != 1 or x.size < 2:
            raise ValueError("need a 1-d array of at least 2 positions")
        if not self.chi > 0:
            raise ValueError(f"chi must be positive, got {self.chi!r}")
        check_ordered(x)
        x.setflags(write=False)
        object.__setattr__(self, "positions", x)
        object.__setattr__(self, "chi", float(self.chi))

    @property
    def n(self) -> int:
        return self.positions.size

    @property
    def mass(self) -> float:
        return 1.0 / (self.n + 1)

    @property
    def gaps(self) -> np.ndarray:
        return np.diff(self.positions)

    def with_positions(self, x) -> "ParticleState":
        return ParticleState(x, self.chi)


@dataclass(frozen=True)
class IndexWindow:
    """Contiguous 1-based inclusive index range ``[q, p]``."""

    q: int
    p: int

    def __post_init__(self):
        if not (1 <= self.q <= self.p):
            raise ValueError(f"invalid window [{self.q}, {self.p}]")

    @property
    def size(self) -> int:
        return self.p - self.q + 1

    @property
    def sl(self) -> slice:
        """Zero-based slice selecting the window from a position array."""
        return slice(self.q - 1, self.p)

    def check(self, n: int) -> "IndexWindow":
        if self.p > n:
            raise ValueError(f"window [{self.q}, {self.p}] exceeds N={n}")
        return self

    def outer_mask(self, n: int) -> np.ndarray:
        mask = np.ones(n, dtype=bool)
        mask[self.sl] = False
        return mask

    def as_list(self) -> list[int]:
        return [self.q, self.p]


@dataclass(frozen=True)
class CriticalLadder:
    """Critical parameters ``chi_N^k = (N+1)/k`` for ``k = 1..N``.

    ``k_star`` is the integer with ``chi_N^k < chi < chi_N^{k-1}``. It is
    ``None`` when ``chi`` sits on a rung (see ``on_rung``) or when
    ``chi <= chi_N`` (no blow-up). For ``chi > chi_N^1 = N+1`` every rung
    is passed and ``k_star`` is 1.
    """

    n: int
    chi: float
    chi_k: np.ndarray = field(repr=False)
    k_star: int | None
    on_rung: int | None = None

    @property
    def chi_n(self) -> float:
        return float(self.chi_k[self.n - 1])

    def rung(self, k: int) -> float:
        """chi_N^k; ``k = 0`` maps to +inf."""
        if k == 0:
            return np.inf
        return float(self.chi_k[k - 1])

    @property
    def supercritical(self) -> bool:
        return self.chi > self.chi_n


def critical_ladder(n: int, chi: float) -> CriticalLadder:
    if n < 2 or not chi > 0:
        raise ValueError("need n >= 2 and chi > 0")
    ks = np.arange(1, n + 1)
    chi_k = (n + 1) / ks
    chi_k.setflags(write=False)
    hit = np.flatnonzero(np.abs(chi_k - chi) <= RUNG_TOL * max(1.0, chi))
    if hit.size:
        return CriticalLadder(n, chi, chi_k, None, on_rung=int(ks[hit[0]]))
    if chi < chi_k[-1]:
        return CriticalLadder(n, chi, chi_k, None)
    # smallest k with (n+1)/k < chi
    k = int(np.floor((n + 1) / chi)) + 1
    return CriticalLadder(n, chi, chi_k, k)


def _coupling(chi: float, n: int) -> float:
    return 2.0 * chi / (n + 1)


def _log_energy(x: np.ndarray, weight: float) -> float:
    """-sum log gaps + weight * sum_{i != j} log|x_i - x_j|."""
    gaps = check_ordered(x)
    i, j = np.triu_indices(x.size, 1)
    pair = np.log(x[j] - x[i]).sum()
    return float(-np.log(gaps).sum() + 2.0 * weight * pair)


def _neg_grad(x: np.ndarray, coupling: float) -> np.ndarray:
    """Gradient-flow velocity of the log energy with pair coupling 2*chi*h."""
    n = x.size
    gaps = check_ordered(x)
    with np.errstate(divide="ignore", over="ignore"):
        inv = 1.0 / gaps
    if not np.all(np.isfinite(inv)):
        k = int(np.flatnonzero(~np.isfinite(inv))[0])
        raise SingularityError(f"gap between particles {k + 1} and {k + 2} "
                               "is too small", (k + 1, k + 2))
    v = np.zeros(n)
    v[:-1] -= inv
    v[1:] += inv
    i, j = np.triu_indices(n, 1)
    w = 1.0 / (x[j] - x[i])
    # i < j: particle i is pulled right by +w, particle j left by -w
    v += coupling * (np.bincount(i, w, n) - np.bincount(j, w, n))
    return v


def energy(state: ParticleState) -> float:
    """Discrete free energy of the configuration."""
    return _log_energy(state.positions, state.chi * state.mass)


def flow_rhs(state: ParticleState) -> np.ndarray:
    """Velocity field ``-grad E`` including the one-sided boundary terms."""
    return _neg_grad(state.positions, _coupling(state.chi, state.n))


def velocity(x: np.ndarray, chi: float) -> np.ndarray:
    """Array form of `flow_rhs`, for integrators."""
    return _neg_grad(x, _coupling(chi, x.size))


def second_moment_slope(n: int, chi: float) -> float:
    """Exact constant rate d(sum X_i^2)/dt."""
    return 2.0 * (n - 1) * (1.0 - chi * n / (n + 1))


def dilation_shift(n: int, chi: float, lam: float) -> float:
    """E(lam X) - E(X) for any admissible X."""
    return -np.log(lam) * ((n - 1) - chi * n * (n - 1) / (n + 1))


def log_hls_functional(positions) -> float:
    """Scale-invariant log-HLS functional of a group of ``p`` particles.

    Nonnegative for every ordered configuration; exactly zero for ``p = 2``.
    """
    x = np.asarray(positions, dtype=float)
    if x.size < 2:
        raise ValueError("need at least 2 positions")
    return _log_energy(x, 1.0 / x.size)
