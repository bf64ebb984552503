"""Split-step propagation of the quantum kicked rotor on a truncated momentum lattice.

States are stored in *centered* momentum order: index ``i`` holds the amplitude of
``m = i - M/2``.  The batched :class:`FloquetPropagator` works in FFT order internally
(``m`` as returned by ``fftfreq``) and is what the ensemble runner uses.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.fft as sfft

__all__ = [
    "LatticeParams",
    "QuantumState",
    "LeakageError",
    "init_state",
    "floquet_step",
    "momentum_variance",
    "leakage_check",
    "dense_floquet_oracle",
    "to_angle",
    "to_momentum",
    "FloquetPropagator",
    "choose_basis_size",
    "is_near_resonance",
]

DENSE_ORACLE_MAX_M = 64
RESONANCE_TOL = 1e-6
RESONANCE_MAX_DEN = 8


class LeakageError(RuntimeError):
    """Probability reached the outer guard band of the momentum lattice."""


def is_near_resonance(hbar: float, max_den: int = RESONANCE_MAX_DEN, tol: float = RESONANCE_TOL) -> bool:
    """True if ``hbar`` lies within ``tol`` of ``4*pi*p/q`` for some ``q <= max_den``, ``p >= 1``."""
    x = hbar / (4 * np.pi)
    for q in range(1, max_den + 1):
        p = round(x * q)
        if p >= 1 and abs(hbar - 4 * np.pi * p / q) < tol:
            return True
    return False


@dataclass(frozen=True)
class LatticeParams:
    M: int
    hbar: float
    K: float = 7.5

    def __post_init__(self):
        if not isinstance(self.M, (int, np.integer)) or self.M < 8 or self.M % 2:
            raise ValueError(f"M must be an even integer >= 8, got {self.M!r}")
        if not self.hbar > 0:
            raise ValueError(f"hbar must be positive, got {self.hbar!r}")
        if is_near_resonance(self.hbar):
            frac = Fraction(self.hbar / (4 * np.pi)).limit_denominator(RESONANCE_MAX_DEN)
            raise ValueError(f"hbar={self.hbar!r} is within {RESONANCE_TOL} of the quantum resonance 4*pi*{frac}")

    @property
    def m(self) -> np.ndarray:
        """Signed momentum quantum numbers in centered order."""
        return np.arange(-self.M // 2, self.M // 2)

    @property
    def p(self) -> np.ndarray:
        return self.hbar * self.m

    @property
    def theta(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.M) / self.M


@dataclass
class QuantumState:
    lattice: LatticeParams
    amplitudes: np.ndarray
    representation: str = "momentum"

    def __post_init__(self):
        if self.representation not in ("momentum", "angle"):
            raise ValueError(f"unknown representation {self.representation!r}")
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape != (self.lattice.M,):
            raise ValueError(f"expected {self.lattice.M} amplitudes, got shape {self.amplitudes.shape}")

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2)))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


def init_state(lattice: LatticeParams) -> QuantumState:
    """The zero-momentum eigenstate ``|p=0>``."""
    amp = np.zeros(lattice.M, dtype=np.complex128)
    amp[lattice.M // 2] = 1.0
    return QuantumState(lattice, amp)


def to_angle(state: QuantumState) -> QuantumState:
    if state.representation == "angle":
        return state
    psi = sfft.ifft(sfft.ifftshift(state.amplitudes), norm="ortho")
    return QuantumState(state.lattice, psi, "angle")


def to_momentum(state: QuantumState) -> QuantumState:
    if state.representation == "momentum":
        return state
    amp = sfft.fftshift(sfft.fft(state.amplitudes, norm="ortho"))
    return QuantumState(state.lattice, amp, "momentum")


def _kick_phase(lattice: LatticeParams, K_t: float) -> np.ndarray:
    return np.exp(-1j * (K_t / lattice.hbar) * np.cos(lattice.theta))


def _free_phase(lattice: LatticeParams, m: np.ndarray) -> np.ndarray:
    # m**2 is formed in exact integer arithmetic before the float product
    m2 = m.astype(np.int64) ** 2
    return np.exp(-0.5j * lattice.hbar * m2)


def floquet_step(state: QuantumState, K_t: float, guard_fraction: float | None = None,
                 leak_threshold: float = 1e-6) -> QuantumState:
    """One period: kick ``exp(-i K_t cos(theta)/hbar)`` then free rotation ``exp(-i hbar m^2/2)``.

    If ``guard_fraction`` is given, raises :class:`LeakageError` when the probability in
    the guard band exceeds ``leak_threshold`` after the step.
    """
    lat = state.lattice
    ang = to_angle(state)
    ang = QuantumState(lat, ang.amplitudes * _kick_phase(lat, K_t), "angle")
    mom = to_momentum(ang)
    out = QuantumState(lat, mom.amplitudes * _free_phase(lat, lat.m), "momentum")
    if guard_fraction is not None:
        leak = leakage_check(out, guard_fraction)
        if leak > leak_threshold:
            raise LeakageError(f"guard-band probability {leak:.3g} exceeds {leak_threshold:.3g}")
    return out


def momentum_variance(state: QuantumState) -> float:
    if state.representation != "momentum":
        raise ValueError("momentum_variance needs a momentum-representation state")
    prob = state.probabilities()
    prob = prob / prob.sum()
    p = state.lattice.p
    mean = np.dot(prob, p)
    return float(np.dot(prob, p * p) - mean * mean)


def _guard_width(M: int, guard_fraction: float) -> int:
    if not 0 < guard_fraction < 0.5:
        raise ValueError(f"guard_fraction must lie in (0, 0.5), got {guard_fraction}")
    return max(1, int(round(guard_fraction * M)))


def leakage_check(state: QuantumState, guard_fraction: float = 0.05) -> float:
    """Total probability in the outermost ``guard_fraction`` of states on each side."""
    g = _guard_width(state.lattice.M, guard_fraction)
    if state.representation != "momentum":
        state = to_momentum(state)
    prob = state.probabilities()
    return float(prob[:g].sum() + prob[-g:].sum())


def dense_floquet_oracle(lattice: LatticeParams, K_t: float) -> np.ndarray:
    """Explicit ``M x M`` Floquet matrix in centered momentum order, for testing.

    Built column by column with an explicit DFT matrix (no FFT).
    """
    M = lattice.M
    if M > DENSE_ORACLE_MAX_M:
        raise ValueError(f"dense oracle limited to M <= {DENSE_ORACLE_MAX_M}, got {M}")
    m = lattice.m
    theta = lattice.theta
    to_ang = np.exp(1j * np.outer(theta, m)) / np.sqrt(M)
    kick = _kick_phase(lattice, K_t)
    free = _free_phase(lattice, m)
    U = np.empty((M, M), dtype=np.complex128)
    for col in range(M):
        phi = to_ang[:, col] * kick
        U[:, col] = free * (to_ang.conj().T @ phi)
    return U


class FloquetPropagator:
    """Batched split-step propagation; rows of ``psi`` are independent states in FFT order.

    Every row gets the precomputed phase for the unperturbed ``K``; rows with a perturbed
    kick ``K + k`` are then multiplied by ``exp(-i k cos(theta)/hbar)``.  The small
    argument keeps that factor accurate even at single precision.
    """

    def __init__(self, lattice: LatticeParams, precision: str = "double"):
        if precision not in ("double", "single"):
            raise ValueError(f"precision must be 'double' or 'single', got {precision!r}")
        self.lattice = lattice
        self.dtype = np.complex128 if precision == "double" else np.complex64
        self.real_dtype = np.float64 if precision == "double" else np.float32
        M = lattice.M
        self.m = np.rint(sfft.fftfreq(M, 1.0 / M)).astype(np.int64)
        self.p = lattice.hbar * self.m
        self.cos_theta = np.cos(lattice.theta)
        self._cos_work = self.cos_theta.astype(self.real_dtype)
        # phases are always formed in double precision, then stored at working precision
        self.base_kick = _kick_phase(lattice, lattice.K).astype(self.dtype)
        self.free = _free_phase(lattice, self.m).astype(self.dtype)

    def initial(self, n: int) -> np.ndarray:
        psi = np.zeros((n, self.lattice.M), dtype=self.dtype)
        psi[:, 0] = 1.0
        return psi

    def _perturbation(self, delta: np.ndarray) -> np.ndarray:
        arg = np.multiply.outer((-delta / self.lattice.hbar).astype(self.real_dtype), self._cos_work)
        out = np.empty(arg.shape, dtype=self.dtype)
        np.cos(arg, out=out.real)
        np.sin(arg, out=out.imag)
        return out

    def step(self, psi: np.ndarray, K_t: np.ndarray | None = None) -> np.ndarray:
        """Advance every row by one period.  ``K_t`` holds per-row kick strengths."""
        psi = sfft.ifft(psi, axis=-1, norm="ortho", overwrite_x=True)
        psi *= self.base_kick
        if K_t is not None:
            K_t = np.asarray(K_t, dtype=np.float64)
            noisy = np.flatnonzero(K_t != self.lattice.K)
            if noisy.size:
                psi[noisy] *= self._perturbation(K_t[noisy] - self.lattice.K)
        psi = sfft.fft(psi, axis=-1, norm="ortho", overwrite_x=True)
        psi *= self.free
        return psi

    def variance(self, psi: np.ndarray) -> np.ndarray:
        prob = (psi.real.astype(np.float64) ** 2 + psi.imag.astype(np.float64) ** 2)
        norm = prob.sum(axis=-1)
        mean = prob @ self.p / norm
        return prob @ (self.p * self.p) / norm - mean * mean

    def leakage(self, psi: np.ndarray, guard_fraction: float = 0.05) -> np.ndarray:
        """Guard-band probability per row (FFT order: the guard sits around ``m = -M/2``)."""
        M = self.lattice.M
        g = _guard_width(M, guard_fraction)
        half = M // 2
        band = psi[..., half - g:half + g]
        return (band.real.astype(np.float64) ** 2 + band.imag.astype(np.float64) ** 2).sum(axis=-1)

    def to_centered(self, psi: np.ndarray) -> np.ndarray:
        return sfft.fftshift(psi, axes=-1)


def choose_basis_size(hbar: float, K: float, T: int, guard_fraction: float = 0.05,
                      variance: float | None = None, n_sigma: float = 5.0,
                      localization_lengths: float = 20.0, min_M: int = 64) -> int:
    """Smallest power of two whose non-guard region holds the expected momentum spread.

    The spread is ``n_sigma`` standard deviations of the expected variance (``D_cl*T``
    with ``D_cl = K**2/2`` unless ``variance`` is supplied) plus a number of
    localization lengths ``D_cl/hbar**2`` in momentum quanta.  Localized states carry
    exponential tails well beyond one localization length, hence the generous default.
    """
    d_cl = 0.5 * K * K
    var = d_cl * T if variance is None else variance
    xi = d_cl / hbar ** 2
    half = n_sigma * np.sqrt(var) / hbar + localization_lengths * xi
    usable = 0.5 - guard_fraction
    M = min_M
    while usable * M < half:
        M *= 2
    return M
