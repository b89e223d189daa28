"""Sine-series analysis, free-wave evolution and eigenfunction geometry on subintervals."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson

from .errors import ConfigError, DegenerateInterval, GridTooCoarse, NearParallel
from .spectrum import FrequencySet

SQRT_2_PI = np.sqrt(2.0 / np.pi)


def phi(n, x):
    """Orthonormal Dirichlet eigenfunction sqrt(2/pi) sin(n x)."""
    return SQRT_2_PI * np.sin(np.multiply.outer(np.asarray(n, dtype=float), np.asarray(x, dtype=float)))


@dataclass(frozen=True)
class BeamState:
    u0_coeffs: np.ndarray
    u1_coeffs: np.ndarray

    def __post_init__(self):
        u0 = np.asarray(self.u0_coeffs, dtype=float).ravel()
        u1 = np.asarray(self.u1_coeffs, dtype=float).ravel()
        if u0.shape != u1.shape:
            raise ConfigError("u0 and u1 coefficient sequences must have equal length")
        object.__setattr__(self, "u0_coeffs", u0)
        object.__setattr__(self, "u1_coeffs", u1)

    @property
    def n_modes(self) -> int:
        return len(self.u0_coeffs)

    @classmethod
    def eigenmode(cls, n: int, n_modes: int, velocity: bool = False) -> "BeamState":
        e = np.zeros(n_modes)
        e[n - 1] = 1.0
        z = np.zeros(n_modes)
        return cls(z, e) if velocity else cls(e, z)

    @classmethod
    def from_samples(cls, x, u0, u1, n_modes: int) -> "BeamState":
        return cls(sine_coeffs(u0, n_modes, x), sine_coeffs(u1, n_modes, x))

    def padded(self, n_modes: int) -> "BeamState":
        """Same state expressed with n_modes coefficients (zero-padded or truncated)."""
        u0 = np.zeros(n_modes)
        u1 = np.zeros(n_modes)
        k = min(n_modes, self.n_modes)
        u0[:k] = self.u0_coeffs[:k]
        u1[:k] = self.u1_coeffs[:k]
        return BeamState(u0, u1)

    def __add__(self, other: "BeamState") -> "BeamState":
        return BeamState(self.u0_coeffs + other.u0_coeffs, self.u1_coeffs + other.u1_coeffs)


def sine_coeffs(samples, n_modes: int, x=None) -> np.ndarray:
    """Coefficients <f, phi_n>, n = 1..n_modes, by composite Simpson on a grid covering [0, pi]."""
    f = np.asarray(samples, dtype=float)
    if x is None:
        x = np.linspace(0.0, np.pi, len(f))
    x = np.asarray(x, dtype=float)
    if x.shape != f.shape or len(x) < 3:
        raise ConfigError("samples and grid must have equal length >= 3")
    if abs(x[0]) > 1e-12 or abs(x[-1] - np.pi) > 1e-9:
        raise ConfigError("sample grid must span [0, pi]")
    h = np.max(np.diff(x))
    if h > np.pi / (10 * n_modes) * (1 + 1e-12):
        raise GridTooCoarse(f"grid step {h:.3g} exceeds pi/(10 N) = {np.pi / (10 * n_modes):.3g}")
    return simpson(phi(np.arange(1, n_modes + 1), x) * f, x=x, axis=-1)


@dataclass(frozen=True)
class FreeCoefficients:
    c_plus: np.ndarray
    c_minus: np.ndarray
    double_branch: np.ndarray


def _roots(fs: FrequencySet, n_modes: int):
    lp = np.array([fs.root(n).lambda_plus for n in range(1, n_modes + 1)])
    lm = np.array([fs.root(n).lambda_minus for n in range(1, n_modes + 1)])
    dbl = np.array([fs.root(n).is_double for n in range(1, n_modes + 1)])
    return lp, lm, dbl


def _check_modes(state: BeamState, fs: FrequencySet):
    if state.n_modes != fs.n_modes:
        raise ConfigError(f"state has {state.n_modes} modes, frequency set has {fs.n_modes}")


def free_coefficients(state: BeamState, fs: FrequencySet) -> FreeCoefficients:
    """Coefficients of the free wave in the basis e^{lambda+ t}, e^{lambda- t} (or t e^{lambda t} when double)."""
    _check_modes(state, fs)
    w0 = state.u0_coeffs.astype(complex)
    w1 = state.u1_coeffs.astype(complex)
    lp, lm, dbl = _roots(fs, state.n_modes)
    q = np.where(dbl, 1.0, lp - lm)
    cp = np.where(dbl, w0, (w1 - lm * w0) / q)
    cm = np.where(dbl, w1 - lp * w0, (-w1 + lp * w0) / q)
    return FreeCoefficients(cp, cm, dbl)


@dataclass(frozen=True)
class EndpointState:
    gamma1: np.ndarray
    gamma2: np.ndarray
    T: float

    @property
    def n_modes(self) -> int:
        return len(self.gamma1)


def free_state(state: BeamState, fs: FrequencySet, T: float) -> EndpointState:
    """Displacement and velocity coefficients of the unforced solution at time T."""
    if not T > 0:
        raise ConfigError(f"T must be positive, got {T}")
    c = free_coefficients(state, fs)
    lp, lm, dbl = _roots(fs, state.n_modes)
    ep, em = np.exp(lp * T), np.exp(lm * T)
    g1 = np.where(dbl, (c.c_plus + c.c_minus * T) * ep, c.c_plus * ep + c.c_minus * em)
    g2 = np.where(dbl, (lp * (c.c_plus + c.c_minus * T) + c.c_minus) * ep, lp * c.c_plus * ep + lm * c.c_minus * em)
    return EndpointState(g1, g2, float(T))


def energy_norms(obj) -> tuple[float, float]:
    """(X^2 norm of displacement, X^0 norm of velocity)."""
    if isinstance(obj, BeamState):
        a, b = obj.u0_coeffs, obj.u1_coeffs
    else:
        a, b = obj.gamma1, obj.gamma2
    n = np.arange(1, len(a) + 1, dtype=float)
    return float(np.sqrt(np.sum(n ** 4 * np.abs(a) ** 2))), float(np.sqrt(np.sum(np.abs(b) ** 2)))


# ---------------------------------------------------------------- subinterval geometry

def _check_interval(a: float, b: float):
    if not (0.0 <= a < b <= np.pi + 1e-12):
        raise DegenerateInterval(f"need 0 <= a < b <= pi, got ({a}, {b})")
    if b - a < 1e-9:
        raise DegenerateInterval(f"interval ({a}, {b}) is too short")


def _sin_sin_primitive(n, m, x):
    # primitive of sin(nx) sin(mx); n == m handled separately
    n = np.asarray(n, dtype=float)
    m = np.asarray(m, dtype=float)
    same = n == m
    d = np.where(same, 1.0, n - m)
    cross = 0.5 * (np.sin(d * x) / d - np.sin((n + m) * x) / (n + m))
    diag = 0.5 * x - np.sin(2 * n * x) / (4 * np.where(n == 0, 1.0, n))
    return np.where(same, diag, cross)


_GL_X, _GL_W = np.polynomial.legendre.leggauss(24)


def restricted_inner(n, m, a: float, b: float):
    """<phi_n, phi_m> on L^2(a, b), exact.

    On intervals much shorter than the wavelength the primitives cancel
    catastrophically, so Gauss-Legendre (exact to round-off there) is used.
    """
    n = np.asarray(n, dtype=float)
    m = np.asarray(m, dtype=float)
    if (b - a) * max(np.max(n), np.max(m), 1.0) < 0.5:
        x = 0.5 * (b - a) * _GL_X + 0.5 * (a + b)
        w = 0.5 * (b - a) * _GL_W
        return (2 / np.pi) * np.sum(w * np.sin(np.multiply.outer(n, x)) * np.sin(np.multiply.outer(m, x)), axis=-1)
    return (2 / np.pi) * (_sin_sin_primitive(n, m, b) - _sin_sin_primitive(n, m, a))


def signed_cos(n, m, a: float, b: float):
    _check_interval(a, b)
    nn = restricted_inner(n, n, a, b)
    mm = restricted_inner(m, m, a, b)
    return restricted_inner(n, m, a, b) / np.sqrt(nn * mm)


def angle_cos(n: int, m: int, a: float, b: float) -> float:
    """|cos| of the angle between phi_n and phi_m in L^2(a, b), from closed-form primitives."""
    if not 1 <= n < m:
        raise ConfigError(f"need 1 <= n < m, got ({n}, {m})")
    return float(abs(signed_cos(n, m, a, b)))


def angle_table(max_mode: int, a: float, b: float):
    """All pairs 1 <= n < m <= max_mode as arrays (n, m, |cos|)."""
    _check_interval(a, b)
    n, m = np.triu_indices(max_mode, k=1)
    n, m = n + 1, m + 1
    return n, m, np.abs(signed_cos(n, m, a, b))


def restriction_norm(n, a: float, b: float):
    """||phi_n|| on L^2(a, b)."""
    return np.sqrt(restricted_inner(n, n, a, b))


def phi_hat(n, x, a: float, b: float):
    """phi_n restricted to (a, b) and normalized there."""
    n = np.asarray(n)
    return phi(n, x) / np.expand_dims(restriction_norm(n, a, b), -1) if n.ndim else phi(n, x) / restriction_norm(n, a, b)


@dataclass(frozen=True)
class SpatialPair:
    interval: tuple
    indices: tuple
    x: np.ndarray
    eta_l: np.ndarray
    eta_m: np.ndarray
    cos: float  # signed cosine between the normalized restrictions
    coef: np.ndarray  # eta = coef @ (phi_hat_l, phi_hat_m)

    @property
    def norm_sq_sum(self) -> float:
        return 2.0 / (1.0 - self.cos ** 2)

    def evaluate(self, which: int, x):
        """eta_l (which=0) or eta_m (which=1) at arbitrary points of (a, b)."""
        a, b = self.interval
        l, m = self.indices
        return self.coef[which, 0] * phi_hat(l, x, a, b) + self.coef[which, 1] * phi_hat(m, x, a, b)


def spatial_biortho_pair(l: int, m: int, a: float, b: float, n_grid: int = 2001) -> SpatialPair:
    """Minimal-norm pair inside span{phi_hat_l, phi_hat_m} biorthogonal to that pair on L^2(a, b)."""
    if l == m:
        raise ConfigError("spatial pair needs distinct modes")
    c = float(signed_cos(min(l, m), max(l, m), a, b))
    if 1.0 - abs(c) < 1e-12:
        raise NearParallel(f"modes {l}, {m} are numerically parallel on ({a}, {b})")
    coef = np.array([[1.0, -c], [-c, 1.0]]) / (1.0 - c * c)
    x = np.linspace(a, b, n_grid)
    pl, pm = phi_hat(l, x, a, b), phi_hat(m, x, a, b)
    return SpatialPair((a, b), (l, m), x, coef[0, 0] * pl + coef[0, 1] * pm,
                       coef[1, 0] * pl + coef[1, 1] * pm, c, coef)
