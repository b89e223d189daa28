"""Independent forward solver for the modal beam equations.

Each mode obeys ``a'' + rho n^(2 alpha) a' + n^4 a = f_n(t)``.  The free part
is propagated with the matrix exponential of the companion matrix and the
forced part by Duhamel integrals.  The integrals use exact exponentials
against piecewise quadratic interpolants of the sampled forcing (the
exponential analogue of Simpson's rule), so stiff modes cost nothing extra.

This module deliberately avoids the moment/biorthogonal machinery so that it
can serve as a verification oracle for it.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from math import factorial

import numpy as np
from scipy.integrate import simpson
from scipy.linalg import expm
from scipy.signal import lfilter

from ._io import cplx
from ._pool import pmap
from .errors import ConfigError, StepTooCoarse
from .modal import BeamState, phi
from .spectrum import FrequencySet


class ForcingKind(str, enum.Enum):
    NONE = "None"
    PROFILED = "Profiled"
    PATCH = "Patch"


@dataclass(frozen=True)
class ForcingSpec:
    kind: ForcingKind
    t: np.ndarray | None = None
    signals: tuple = ()        # (f1, f2) for profiled forcing
    profiles: tuple = ()       # (h1, h2) sine coefficients
    x: np.ndarray | None = None
    f_xt: np.ndarray | None = None  # shape (len(t), len(x)) on the patch

    @classmethod
    def none(cls) -> "ForcingSpec":
        return cls(ForcingKind.NONE)

    @classmethod
    def profiled(cls, t, f1, h1, f2=None, h2=None) -> "ForcingSpec":
        t = np.asarray(t, dtype=float)
        f1 = np.asarray(f1)
        h1 = np.asarray(h1, dtype=float)
        f2 = np.zeros_like(f1) if f2 is None else np.asarray(f2)
        h2 = np.zeros_like(h1) if h2 is None else np.asarray(h2, dtype=float)
        if f1.shape != t.shape or f2.shape != t.shape:
            raise ConfigError("signals must be sampled on the time grid")
        return cls(ForcingKind.PROFILED, t, (f1, f2), (h1, h2))

    @classmethod
    def patch(cls, t, x, f_xt) -> "ForcingSpec":
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        f_xt = np.asarray(f_xt)
        if f_xt.shape != (len(t), len(x)):
            raise ConfigError(f"patch forcing must have shape (len(t), len(x)) = {(len(t), len(x))}")
        if len(x) < 3 or x[0] < 0 or x[-1] > np.pi + 1e-12:
            raise ConfigError("patch grid must lie inside [0, pi] with at least 3 points")
        return cls(ForcingKind.PATCH, t, x=x, f_xt=f_xt)

    def fourier(self, n_modes: int) -> np.ndarray:
        """Modal forcing f_n(t) as an array of shape (n_modes, len(t))."""
        if self.kind is ForcingKind.NONE:
            return np.zeros((n_modes, 0 if self.t is None else len(self.t)))
        if self.kind is ForcingKind.PROFILED:
            h1 = _fit(self.profiles[0], n_modes)
            h2 = _fit(self.profiles[1], n_modes)
            f1, f2 = self.signals
            return np.outer(h1, f1) + np.outer(h2, f2)
        basis = phi(np.arange(1, n_modes + 1), self.x)  # (N, nx)
        return simpson(self.f_xt[None, :, :] * basis[:, None, :], x=self.x, axis=-1)

    def patch_quadrature_error(self, n_modes: int) -> float:
        """Change in the top-mode coefficient when the spatial grid is halved."""
        if self.kind is not ForcingKind.PATCH:
            return 0.0
        full = self.fourier(n_modes)[-1]
        if len(self.x) < 5 or len(self.x) % 2 == 0:
            return float("nan")
        xs = self.x[::2]
        coarse = simpson(self.f_xt[:, ::2] * phi(n_modes, xs)[None, :], x=xs, axis=-1)
        return float(np.max(np.abs(full - coarse)))


def _fit(h, n):
    out = np.zeros(n)
    k = min(n, len(h))
    out[:k] = np.asarray(h, dtype=float)[:k]
    return out


# ---------------------------------------------------------------- quadrature

def _moments(w: complex, jmax: int = 3) -> np.ndarray:
    """M_j = int_0^2 u^j e^{-w u} du for j = 0..jmax."""
    if abs(w) < 1.0:
        k = np.arange(40)
        coef = np.array([(-w) ** kk / factorial(kk) for kk in k], dtype=complex)
        return np.array([np.sum(coef * 2.0 ** (j + k + 1) / (j + k + 1)) for j in range(jmax + 1)])
    e = np.exp(-2 * w)
    m = [(1 - e) / w]
    for j in range(1, jmax + 1):
        m.append((j * m[-1] - 2.0 ** j * e) / w)
    return np.array(m)


# quadratic Lagrange basis on nodes u = 0, 1, 2 as polynomial coefficient rows (1, u, u^2)
_LAGRANGE = np.array([[1.0, -1.5, 0.5], [0.0, 2.0, -1.0], [0.0, -0.5, 0.5]])


def _check_grid(t, T):
    t = np.asarray(t, dtype=float)
    if len(t) < 3 or len(t) % 2 == 0:
        raise ConfigError("time grid needs an odd number (>= 3) of samples")
    h = (t[-1] - t[0]) / (len(t) - 1)
    if abs(t[0]) > 1e-12 * max(1.0, T) or abs(t[-1] - T) > 1e-9 * max(1.0, T):
        raise ConfigError("time grid must span [0, T]")
    if np.max(np.abs(np.diff(t) - h)) > 1e-9 * h:
        raise ConfigError("time grid must be uniform")
    return t, h


def max_step(lams, T: float) -> float:
    lam_max = max(abs(complex(l)) for l in lams)
    return min(0.1 / lam_max if lam_max > 0 else np.inf, T / 256)


def _exp_integrals(lam: complex, f: np.ndarray, h: float, T: float, with_t: bool):
    """(int_0^T e^{lam (T-s)} f ds, int_0^T (T-s) e^{lam (T-s)} f ds) with exact exponentials."""
    w = lam * h
    M = _moments(w)
    n_pan = (len(f) - 1) // 2
    s0 = 2 * h * np.arange(n_pan)
    scale = np.exp(lam * (T - s0))
    # weights for e^{-w u} L_i(u)
    W0 = h * _LAGRANGE @ M[:3]
    # weights for u e^{-w u} L_i(u)
    W1 = h * _LAGRANGE @ M[1:4]
    fa, fb, fc = f[0:-1:2], f[1::2], f[2::2]
    p0 = W0[0] * fa + W0[1] * fb + W0[2] * fc
    A = np.sum(scale * p0)
    if not with_t:
        return A, 0j
    p1 = W1[0] * fa + W1[1] * fb + W1[2] * fc
    B = np.sum(scale * ((T - s0) * p0 - h * p1))
    return A, B


def duhamel_mode(n: int, forcing_n, t, fs: FrequencySet, T: float) -> tuple[complex, complex]:
    """(a_n(T), a_n'(T)) for zero initial data under the sampled modal forcing."""
    t, h = _check_grid(t, T)
    f = np.asarray(forcing_n)
    if f.shape != t.shape:
        raise ConfigError("forcing must be sampled on the time grid")
    r = fs.root(n)
    lim = max_step((r.lambda_plus, r.lambda_minus), T)
    if h > lim * (1 + 1e-9):
        raise StepTooCoarse(f"mode {n}: step {h:.3g} exceeds {lim:.3g}")
    if not np.any(f):
        return 0j, 0j
    if r.is_double:
        B0, B1 = _exp_integrals(r.lambda_plus, f, h, T, with_t=True)
        return complex(B1), complex(B0 + r.lambda_plus * B1)
    Ap, _ = _exp_integrals(r.lambda_plus, f, h, T, with_t=False)
    Am, _ = _exp_integrals(r.lambda_minus, f, h, T, with_t=False)
    q = r.lambda_plus - r.lambda_minus
    return complex((Ap - Am) / q), complex((r.lambda_plus * Ap - r.lambda_minus * Am) / q)


def _history(lam, f, h, T, with_t):
    # running integrals at even nodes via a first-order recursion y_i = e^{2 lam h} y_{i-1} + panel_i
    w = lam * h
    M = _moments(w)
    W0 = h * _LAGRANGE @ M[:3]
    W1 = h * _LAGRANGE @ M[1:4]
    fa, fb, fc = f[0:-1:2], f[1::2], f[2::2]
    E = np.exp(2 * w)
    # panel i integrated up to its own right end: e^{lam (s_{2i+2} - s)} = E e^{-w u}
    p0 = E * (W0[0] * fa + W0[1] * fb + W0[2] * fc)
    A = np.concatenate([[0j], lfilter([1.0], [1.0, -E], p0)])
    if not with_t:
        return A, None
    p1 = E * (W1[0] * fa + W1[1] * fb + W1[2] * fc)
    # (t_end - s) = 2h - h u on the panel; shift accumulated terms by 2h per step
    n_pan = len(fa)
    B = np.zeros(n_pan + 1, dtype=complex)
    acc_A = 0j
    for i in range(n_pan):
        B[i + 1] = E * (B[i] + 2 * h * acc_A) + (2 * h * p0[i] - h * p1[i])
        acc_A = A[i + 1]
    return A, B


@dataclass
class SimResult:
    a_T: np.ndarray
    a_prime_T: np.ndarray
    free_a: np.ndarray
    free_a_prime: np.ndarray
    residual_x2: float
    residual_x0: float
    initial_x2: float
    initial_x0: float
    T: float
    history_t: np.ndarray | None = None
    history_a: np.ndarray | None = None
    notes: list = field(default_factory=list)

    @property
    def relative_energy(self) -> float:
        init = self.initial_x2 + self.initial_x0
        res = self.residual_x2 + self.residual_x0
        return res / init if init > 0 else res

    def to_dict(self):
        return {
            "T": self.T,
            "residual_x2": self.residual_x2,
            "residual_x0": self.residual_x0,
            "initial_x2": self.initial_x2,
            "initial_x0": self.initial_x0,
            "relative_energy": self.relative_energy,
            "modes": [
                {"n": n + 1, "a_T": cplx(self.a_T[n]), "a_prime_T": cplx(self.a_prime_T[n]),
                 "free_a_T": cplx(self.free_a[n]), "free_a_prime_T": cplx(self.free_a_prime[n])}
                for n in range(len(self.a_T))
            ],
            "notes": list(self.notes),
        }


def _mode_expm(n: int, alpha: float, rho: float, t: float, w0: float, w1: float):
    A = np.array([[0.0, 1.0], [-float(n) ** 4, -rho * float(n) ** (2 * alpha)]])
    return expm(A * t) @ np.array([w0, w1])


def free_propagate(state: BeamState, fs: FrequencySet, T: float):
    """Unforced endpoint via the matrix exponential of each modal companion matrix."""
    al, rho = fs.params.alpha, fs.params.rho
    y = np.array([_mode_expm(n, al, rho, T, state.u0_coeffs[n - 1], state.u1_coeffs[n - 1])
                  for n in range(1, state.n_modes + 1)])
    return y[:, 0].astype(complex), y[:, 1].astype(complex)


def _norms(a, ap):
    n = np.arange(1, len(a) + 1, dtype=float)
    return float(np.sqrt(np.sum(n ** 4 * np.abs(a) ** 2))), float(np.sqrt(np.sum(np.abs(ap) ** 2)))


def simulate(state: BeamState, forcing: ForcingSpec, fs: FrequencySet, T: float,
             history: bool = False) -> SimResult:
    """Endpoint of the forced beam: free part plus Duhamel response of every mode."""
    if not T > 0:
        raise ConfigError(f"T must be positive, got {T}")
    if state.n_modes != fs.n_modes:
        raise ConfigError(f"state has {state.n_modes} modes, frequency set has {fs.n_modes}")
    N = fs.n_modes
    fa, fap = free_propagate(state, fs, T)
    ca = np.zeros(N, dtype=complex)
    cap = np.zeros(N, dtype=complex)
    notes = []
    hist_t = hist_a = None
    if forcing.kind is not ForcingKind.NONE:
        fn = forcing.fourier(N)
        out = pmap(lambda n: duhamel_mode(n, fn[n - 1], forcing.t, fs, T), range(1, N + 1))
        for n, (a_n, ap_n) in enumerate(out):
            ca[n], cap[n] = a_n, ap_n
        if forcing.kind is ForcingKind.PATCH:
            notes.append(f"patch quadrature change at mode {N}: {forcing.patch_quadrature_error(N):.3e}")
        if history:
            hist_t, hist_a = _trajectories(state, fn, forcing.t, fs, T)
    a, ap = fa + ca, fap + cap
    rx2, rx0 = _norms(a, ap)
    ix2, ix0 = _norms(state.u0_coeffs, state.u1_coeffs)
    return SimResult(a, ap, fa, fap, rx2, rx0, ix2, ix0, float(T), hist_t, hist_a, notes)


def _trajectories(state, fn, t, fs, T):
    t, h = _check_grid(t, T)
    te = t[::2]
    out = np.zeros((fs.n_modes, len(te)), dtype=complex)
    for n in range(1, fs.n_modes + 1):
        r = fs.root(n)
        al, rho = fs.params.alpha, fs.params.rho
        free = np.array([_mode_expm(n, al, rho, tt, state.u0_coeffs[n - 1], state.u1_coeffs[n - 1])[0] for tt in te])
        if r.is_double:
            _, B = _history(r.lambda_plus, fn[n - 1], h, T, with_t=True)
            forced = B
        else:
            Ap, _ = _history(r.lambda_plus, fn[n - 1], h, T, with_t=False)
            Am, _ = _history(r.lambda_minus, fn[n - 1], h, T, with_t=False)
            forced = (Ap - Am) / (r.lambda_plus - r.lambda_minus)
        out[n - 1] = free + forced
    return te, out


def time_grid(fs: FrequencySet, T: float, min_intervals: int = 512, safety: float = 2.0) -> np.ndarray:
    """Uniform grid on [0, T] fine enough for every mode of fs (odd number of samples)."""
    lams = [fs.lam(k) for k in fs.keys]
    h = max_step(lams, T) / safety
    m = max(min_intervals, int(np.ceil(T / h)))
    m += m % 2
    return np.linspace(0.0, T, m + 1)
