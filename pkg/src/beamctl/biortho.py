"""Families biorthogonal to exponentials t^p e^{i lambda t} on L^2(0, T).

Two constructions are provided:

* ``build_biortho_gram``: least-norm duals inside the exponential span, from
  the inverse Gram matrix (switches to mpmath when the matrix is ill
  conditioned).
* ``build_biortho_analytic``: the entire-function route.  A Lagrange-type
  interpolating product ``F`` is damped on the real axis by a multiplier
  ``P`` whose inverse Fourier transform is supported in [0, delta]; the duals
  are inverse Fourier transforms of ``F * P`` computed by FFT.

Inner products are ``<f, g> = int_0^T f(t) conj(g(t)) dt``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable

import mpmath
import numpy as np
from scipy.integrate import quad, romb, simpson
from scipy.special import zeta

from ._io import cplx
from ._pool import pmap
from .beamsim import max_step
from .errors import ConfigError, DecayInsufficient, GridAliased, IllConditioned, PrecisionLoss, SupportLeak
from .spectrum import FrequencySet, classify_regime, counting_function


# ---------------------------------------------------------------- counting majorant and theta

@dataclass(frozen=True)
class NuMajorant:
    r0: float
    c0: float
    c1: float
    kappa: float

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        return np.where(r < self.r0, 0.0, self.c1 * np.power(np.maximum(r, 1e-300), self.kappa))

    def validate(self, fs: FrequencySet, r=None) -> bool:
        """Check c0 r^k <= nu_hat(r) <= nu(r) on a grid of r >= r0 where the count is positive."""
        if r is None:
            r = np.geomspace(max(self.r0, 1e-3), max(10 * self.r0, 1e3), 60)
        emp = counting_function(fs, r)
        upper = np.all(emp <= self(r) + 1e-9)
        pos = emp > 0
        lower = np.all(self.c0 * r[pos] ** self.kappa <= emp[pos] + 1e-9)
        return bool(upper and lower)


def fit_nu_majorant(fs: FrequencySet, kappa: float | None = None, r_max: float = 1e3) -> NuMajorant:
    if kappa is None:
        kappa = classify_regime(fs.params).kappa
    v = fs.values()
    d = np.abs(v[:, None] - v[None, :])
    d = d[d > 0]
    r0 = float(d.min()) if d.size else 1.0
    r = np.geomspace(r0, max(r_max, 2 * r0), 200)
    emp = counting_function(fs, r).astype(float)
    c1 = float(np.max(emp / r ** kappa))
    pos = emp > 0
    c0 = float(np.min(emp[pos] / r[pos] ** kappa)) if pos.any() else 0.0
    return NuMajorant(r0, c0, max(c1, 1e-12), float(kappa))


def theta_majorant(nu: NuMajorant, s: float) -> float:
    """2 * int_0^inf nu(r)/r * s^2/(s^2 + r^2) dr for the power-law majorant."""
    if s <= 0:
        return 0.0
    k = nu.kappa

    def integrand(r):
        return nu.c1 * r ** (k - 1) * s * s / (s * s + r * r)

    lo = nu.r0
    parts = [(lo, max(lo, s)), (max(lo, s), np.inf)]
    total = 0.0
    for a, b in parts:
        if b > a:
            val, _ = quad(integrand, a, b, limit=200, epsabs=0, epsrel=1e-10)
            total += val
    return 2.0 * total


def theta_shifted(nu: NuMajorant, s: float, lam_min: float) -> float:
    """theta enlarged to absorb the extra linear factor of the second product."""
    return theta_majorant(nu, s) + np.log(s + 1.0) + abs(np.log(min(1.0, lam_min)))


# ---------------------------------------------------------------- multiplier

_LOGCOS = ((2, -1 / 2), (4, -1 / 12), (6, -1 / 45), (8, -17 / 2520))


@dataclass
class Multiplier:
    """P(z) = prod_n (1 + e^{2 i a_n z}) / 2 with a_n = A n^{-1/kt}.

    The first ``len(a_seq)`` factors are explicit; the remaining ones enter
    through power sums S_p = sum_{n > M} a_n^p via the series of log cos.
    """

    a_seq: np.ndarray
    delta: float
    kappa_tilde: float
    A: float
    tail: dict
    s_valid: float
    C_P: float = float("nan")
    Q: float = float("nan")
    C4: float = float("nan")
    decay_exponent: float = float("nan")

    @property
    def n_terms(self) -> int:
        return len(self.a_seq)

    def log_p(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape, dtype=complex)
        for a in self.a_seq:
            out += np.log(0.5 * (1 + np.exp(2j * a * z)))
        return out + self._tail_log(z)

    def _tail_log(self, z):
        out = 1j * z * self.tail[1]
        for p, c in _LOGCOS:
            out = out + c * self.tail[p] * z ** p
        return out

    def dlog_p(self, z):
        """P'(z)/P(z)."""
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape, dtype=complex)
        for a in self.a_seq:
            e = np.exp(2j * a * z)
            out += 2j * a * e / (1 + e)
        out = out + 1j * self.tail[1]
        for p, c in _LOGCOS:
            out = out + c * p * self.tail[p] * z ** (p - 1)
        return out

    def p(self, z):
        return np.exp(self.log_p(z))

    def dp(self, z):
        return self.p(z) * self.dlog_p(z)

    def log_p_real(self, s, chunk: int = 1 << 15):
        """log P on the real axis using real arithmetic (fast path for large grids)."""
        s = np.asarray(s, dtype=float)
        mag = np.zeros(s.shape)
        neg = np.zeros(s.shape, dtype=np.int64)
        flat_s, flat_m, flat_n = s.ravel(), mag.ravel(), neg.ravel()
        a = self.a_seq
        for i in range(0, flat_s.size, chunk):
            c = np.cos(np.outer(a, flat_s[i:i + chunk]))
            with np.errstate(divide="ignore"):
                flat_m[i:i + chunk] = np.sum(np.log(np.abs(c)), axis=0)
            flat_n[i:i + chunk] = np.sum(c < 0, axis=0)
        phase = s * (np.sum(a) + self.tail[1]) + np.pi * (neg % 2)
        real_tail = sum(c * self.tail[p] * s ** p for p, c in _LOGCOS)
        return mag + real_tail + 1j * phase


def _head_size(A: float, kt: float, s_max: float, cap: int = 200_000) -> int:
    # smallest M with a_{M+1} * s_max <= 1/4, so the tail series converges fast
    m = int(np.ceil((4 * A * s_max) ** kt))
    return int(min(max(m, 8), cap))


def _envelope(mult: Multiplier, s_grid):
    """Upper envelope of log|P| over short windows starting at each grid point."""
    out = []
    for s in s_grid:
        w = np.linspace(s, 1.25 * s, 64)
        out.append(np.max(mult.log_p_real(w).real))
    return np.array(out)


def build_multiplier(T: float, kappa: float, n_terms: int | None = None, s_max: float = 1e3,
                     nu: NuMajorant | None = None, delta: float | None = None,
                     check: bool = True) -> Multiplier:
    """Multiplier with support budget delta (default T) and a_n proportional to n^{-1/kt}, kt = (1 + kappa)/2."""
    if not (0 < kappa < 1):
        raise ConfigError(f"kappa must lie in (0, 1), got {kappa}")
    if not T > 0:
        raise ConfigError(f"T must be positive, got {T}")
    delta = T if delta is None else float(delta)
    kt = (1 + kappa) / 2
    p = 1 / kt
    A = (delta / 2) / zeta(p)
    M = _head_size(A, kt, s_max) if n_terms is None else int(n_terms)
    n = np.arange(1, M + 1, dtype=float)
    a = A * n ** (-p)
    tail = {1: A * zeta(p, M + 1)}
    for q, _ in _LOGCOS:
        tail[q] = A ** q * zeta(q * p, M + 1)
    mult = Multiplier(a, delta, kt, A, tail, float(s_max))
    if check:
        _check_multiplier(mult, kappa, s_max, nu)
    return mult


def _check_multiplier(mult: Multiplier, kappa: float, s_max: float, nu: NuMajorant | None):
    r = np.geomspace(1e-2, s_max, 80)
    mult.C_P = float(np.max(np.abs(mult.dp(1j * r))))
    beta = np.geomspace(1.0, s_max, 40)
    lp = mult.log_p(1j * beta).real
    mult.C4 = float(np.max(-lp / beta ** mult.kappa_tilde))
    s = np.geomspace(max(1.0, s_max / 1e3), s_max, 40)
    env = _envelope(mult, s)
    good = env < -1.0
    if good.sum() >= 4:
        slope, _ = np.polyfit(np.log(s[good]), np.log(-env[good]), 1)
        mult.decay_exponent = float(slope)
    if nu is None:
        nu = NuMajorant(1.0, 1.0, 1.0, kappa)
    th = np.array([theta_majorant(nu, x) for x in s])
    mult.Q = float(np.max(env + 3 * th))
    if not mult.decay_exponent > kappa:
        raise DecayInsufficient(
            f"real-axis decay exponent {mult.decay_exponent:.3f} does not exceed kappa={kappa:.3f}")


# ---------------------------------------------------------------- interpolating products

def f_products(j: int, fs: FrequencySet, z, trunc: int | None = None, indices=None):
    """(F1, F2) at z for node j over the retained nodes (|k| <= trunc, or the given keys)."""
    if indices is None:
        trunc = fs.n_modes if trunc is None else trunc
        indices = [k for k in fs.keys if abs(k) <= trunc]
    nodes = _distinct_nodes(fs, indices)
    lj = fs.lam(j)
    others = np.array([fs.lam(k) for k in nodes if abs(fs.lam(k) - lj) > 0], dtype=complex)
    return _f_pair(np.asarray(z, dtype=complex), lj, others)


def _f_pair(z, lj, others):
    w = z - lj
    F1 = np.ones(np.shape(z), dtype=complex)
    for lk in others:
        F1 = F1 * (1 - (w / (lk - lj)) ** 2) ** 2
    return F1, w * F1


def _log_f1(w, d):
    out = np.zeros(np.shape(w), dtype=complex)
    for dk in d:
        out += 2 * np.log(1 - (w / dk) ** 2)
    return out


def _distinct_nodes(fs: FrequencySet, keys):
    """Representative keys of distinct frequencies (a double mode is represented by +n)."""
    out = []
    for k in sorted(keys, key=lambda k: (abs(k), -k)):
        if k < 0 and -k in fs.double_modes and -k in keys:
            continue
        out.append(k)
    return out


# ---------------------------------------------------------------- atoms and families

@dataclass(frozen=True)
class Atom:
    key: int      # moment index the atom answers to
    lam: complex
    power: int    # basis function t^power e^{i lam t}
    node: int     # representative key of the frequency

    @property
    def ident(self) -> tuple:
        return (self.key, self.power)


def atoms_for(fs: FrequencySet, keys, with_t_terms: bool = False) -> list[Atom]:
    """Atoms for a set of keys.  Double modes always contribute (e, t e) as keys (+n, -n)."""
    keys = set(int(k) for k in keys)
    out = []
    for k in sorted(keys, key=lambda k: (abs(k), -k)):
        n = abs(k)
        lam = fs.lam(k)
        if n in fs.double_modes and -k in keys:
            out.append(Atom(k, fs.lam(n), 0 if k > 0 else 1, n))
            continue
        out.append(Atom(k, lam, 0, k))
        if with_t_terms:
            out.append(Atom(k, lam, 1, k))
    return out


class Strategy(str, enum.Enum):
    ANALYTIC = "analytic"
    GRAM = "gram"


@dataclass
class BiorthFamily:
    T: float
    atoms: tuple
    time_grid: np.ndarray
    duals: dict                 # atom ident -> sampled dual g (not conjugated)
    norms: dict                 # atom ident -> L^2 norm
    strategy: Strategy
    residual: float | None = None
    meta: dict = field(default_factory=dict)
    _sampler: Callable | None = field(default=None, repr=False)
    _combiner: Callable | None = field(default=None, repr=False)
    inverse_gram: np.ndarray | None = field(default=None, repr=False)

    @property
    def g1(self) -> dict:
        return {a.node: self.duals[a.ident] for a in self.atoms if a.power == 0}

    @property
    def g2(self) -> dict:
        return {a.node: self.duals[a.ident] for a in self.atoms if a.power == 1}

    def sample(self, factor: int = 1):
        """(t, duals) on a grid refined by an integer factor."""
        if factor == 1 or self._sampler is None:
            return self.time_grid, self.duals
        return self._sampler(factor)

    def combine(self, weights: dict, factor: int = 1) -> np.ndarray:
        """sum_a w_a conj(g_a(t)) on the (refined) family grid."""
        if self._combiner is not None:
            return self._combiner(weights, factor)
        t, duals = self.sample(factor)
        out = np.zeros(len(t), dtype=complex)
        for ident, w in weights.items():
            if w != 0:
                out += w * np.conj(duals[ident])
        return out

    def manifest(self) -> dict:
        return {
            "T": self.T,
            "strategy": self.strategy.value,
            "residual": self.residual,
            "atoms": [{"key": a.key, "power": a.power, "node": a.node, "lambda": cplx(a.lam),
                       "norm": self.norms[a.ident]} for a in self.atoms],
            "n_samples": len(self.time_grid),
            "meta": self.meta,
        }


def _pow2(m: int) -> int:
    return 1 << int(np.ceil(np.log2(max(m, 2))))


def _default_intervals(fs: FrequencySet, T: float, safety: float = 2.0, minimum: int = 512) -> int:
    h = max_step([fs.lam(k) for k in fs.keys], T) / safety
    return _pow2(max(minimum, int(np.ceil(T / h))))


def integrate(y, t, axis=-1, smooth: bool = True):
    """Romberg on 2^k + 1 uniform samples of smooth data, Simpson otherwise."""
    n = np.shape(y)[axis] - 1
    if smooth and n >= 2 and n & (n - 1) == 0:
        return romb(y, dx=(t[-1] - t[0]) / n, axis=axis)
    return simpson(y, x=t, axis=axis)


def _l2_norms(t, duals, smooth=True):
    return {k: float(np.sqrt(integrate(np.abs(g) ** 2, t, smooth=smooth))) for k, g in duals.items()}


# ---------------------------------------------------------------- Gram strategy

def _moment_series(z, p, terms=60, mp=None):
    # int_0^1 u^p e^{z u} du for small |z|
    if mp is None:
        k = np.arange(terms)
        fact = np.cumprod(np.concatenate([[1.0], np.arange(1, terms, dtype=float)]))
        return np.sum(z ** k / (fact * (k + p + 1)))
    s = mp.mpc(0)
    term = mp.mpc(1)
    for k in range(terms * 2):
        s += term / (k + p + 1)
        term *= z / (k + 1)
        if abs(term) < mp.mpf(10) ** (-mp.dps - 5):
            break
    return s


def t_moment(mu, p: int, T, mp=None):
    """int_0^T t^p e^{i mu t} dt in closed form (power series near mu = 0)."""
    lib = np if mp is None else mp
    z = 1j * mu * T if mp is None else mp.mpc(0, 1) * mu * T
    if abs(z) < 1:
        return T ** (p + 1) * _moment_series(z, p, mp=mp)
    e = lib.exp(z)
    iz = (1j * mu) if mp is None else mp.mpc(0, 1) * mu
    m = (e - 1) / iz
    for q in range(1, p + 1):
        m = (T ** q * e - q * m) / iz
    return m


def gram_matrix(atoms, T, mp=None):
    n = len(atoms)
    if mp is None:
        G = np.empty((n, n), dtype=complex)
        for i, a in enumerate(atoms):
            for j, b in enumerate(atoms):
                G[i, j] = t_moment(a.lam - np.conj(b.lam), a.power + b.power, T)
        return G
    T = mp.mpf(T)
    G = mp.matrix(n, n)
    lam = [mp.mpc(a.lam.real, a.lam.imag) for a in atoms]
    for i, a in enumerate(atoms):
        for j, b in enumerate(atoms):
            G[i, j] = t_moment(lam[i] - mp.conj(lam[j]), a.power + b.power, T, mp=mp)
    return G


DOUBLE_COND = 1e6


def _mp_cond(G_mp, mp) -> float:
    ev = mp.eighe(G_mp, eigvals_only=True)
    ev = [abs(x) for x in ev]
    return float(max(ev) / min(ev))


def build_biortho_gram(fs: FrequencySet, indices, T: float, with_t_terms: bool = False,
                       n_intervals: int | None = None, max_cond: float = 1e12,
                       atoms=None) -> BiorthFamily:
    """Least-norm biorthogonal family in span{t^p e^{i lambda t}} on L^2(0, T)."""
    if not T > 0:
        raise ConfigError(f"T must be positive, got {T}")
    atoms = tuple(atoms if atoms is not None else atoms_for(fs, indices, with_t_terms))
    m = _pow2(n_intervals) if n_intervals else _default_intervals(fs, T)
    t = np.linspace(0.0, T, m + 1)
    if not atoms:
        return BiorthFamily(T, (), t, {}, {}, Strategy.GRAM, 0.0, {"cond": 1.0})
    G = gram_matrix(atoms, T)
    cond = float(np.linalg.cond(G))
    meta = {"cond": cond, "precision": "double"}
    if cond <= DOUBLE_COND:
        C = np.linalg.inv(G)
        C = 0.5 * (C + C.conj().T)
        sampler, combiner = _double_eval(atoms, C, T, m)
        Cinv = C
    else:
        digits = 30 + int(np.log10(cond)) if cond < 1e15 else 60
        with mpmath.workdps(digits):
            G_mp = gram_matrix(atoms, T, mp=mpmath.mp)
            if cond >= 1e14:
                cond = _mp_cond(G_mp, mpmath.mp)
                digits = max(digits, 30 + int(np.log10(cond)))
        meta.update(cond=cond, precision=f"mp{digits}")
        if cond > max_cond:
            raise IllConditioned(f"Gram condition number {cond:.3e} exceeds {max_cond:.1e}")
        with mpmath.workdps(digits):
            G_mp = gram_matrix(atoms, T, mp=mpmath.mp)
            C_mp = G_mp ** -1
        Cinv = np.array([[complex(C_mp[i, j]) for j in range(len(atoms))] for i in range(len(atoms))])
        sampler, combiner = _mp_eval(atoms, C_mp, T, m, digits)
    if cond > max_cond:  # double path
        raise IllConditioned(f"Gram condition number {cond:.3e} exceeds {max_cond:.1e}")
    _, duals = sampler(1)
    norms = {a.ident: float(np.sqrt(max(Cinv[i, i].real, 0.0))) for i, a in enumerate(atoms)}
    meta["norm_source"] = "inverse Gram diagonal"
    return BiorthFamily(T, atoms, t, duals, norms, Strategy.GRAM, None, meta, sampler, combiner, Cinv)


def _basis_double(atoms, t):
    return np.array([t ** a.power * np.exp(1j * a.lam * t) for a in atoms])


def _double_eval(atoms, C, T, m):
    def sampler(factor):
        t = np.linspace(0.0, T, m * factor + 1)
        B = _basis_double(atoms, t)
        g = C @ B
        return t, {a.ident: g[i] for i, a in enumerate(atoms)}

    def combiner(weights, factor):
        t = np.linspace(0.0, T, m * factor + 1)
        w = np.array([weights.get(a.ident, 0) for a in atoms], dtype=complex)
        d = w @ np.conj(C)  # d_c = sum_a w_a conj(C_ac)
        return d @ np.conj(_basis_double(atoms, t))

    return sampler, combiner


def _mp_basis_rows(atoms, T, n_int, digits):
    """Rows t^p e^{i lam t} on the uniform grid, in mpmath, via powers of the step factor."""
    mp = mpmath.mp
    h = mp.mpf(T) / n_int
    rows = []
    for a in atoms:
        lam = mp.mpc(a.lam.real, a.lam.imag)
        z = mp.exp(mp.mpc(0, 1) * lam * h)
        cur = mp.mpc(1)
        row = []
        for k in range(n_int + 1):
            row.append(cur * (k * h) ** a.power if a.power else cur)
            cur *= z
        rows.append(row)
    return rows


def _mp_eval(atoms, C_mp, T, m, digits):
    na = len(atoms)
    cache = {}

    def rows(factor):
        if factor not in cache:
            with mpmath.workdps(digits):
                cache[factor] = _mp_basis_rows(atoms, T, m * factor, digits)
        return cache[factor]

    def sampler(factor):
        t = np.linspace(0.0, T, m * factor + 1)
        R = rows(factor)
        duals = {}
        with mpmath.workdps(digits):
            for i, a in enumerate(atoms):
                coef = [C_mp[i, c] for c in range(na)]
                vals = [mpmath.fsum(coef[c] * R[c][k] for c in range(na)) for k in range(len(t))]
                duals[a.ident] = np.array([complex(v) for v in vals])
        return t, duals

    def combiner(weights, factor):
        t = np.linspace(0.0, T, m * factor + 1)
        R = rows(factor)
        with mpmath.workdps(digits):
            w = [mpmath.mpc(complex(weights.get(a.ident, 0)).real, complex(weights.get(a.ident, 0)).imag)
                 for a in atoms]
            d = [mpmath.fsum(w[i] * mpmath.conj(C_mp[i, c]) for i in range(na)) for c in range(na)]
            vals = [mpmath.fsum(d[c] * mpmath.conj(R[c][k]) for c in range(na)) for k in range(len(t))]
            return np.array([complex(v) for v in vals])

    return sampler, combiner


def least_norm_value(fam: BiorthFamily, weights: dict) -> float:
    """Exact L^2 norm of sum_a w_a conj(g_a) for a Gram family: sqrt(w^H G^{-1} w)."""
    C = fam.inverse_gram
    if C is None:
        raise ConfigError("exact norm needs a Gram family")
    w = np.array([weights.get(a.ident, 0) for a in fam.atoms], dtype=complex)
    return float(np.sqrt(max(np.real(np.conj(w) @ C @ w), 0.0)))


# ---------------------------------------------------------------- analytic strategy

@dataclass(frozen=True)
class SamplingConfig:
    oversample: float = 2.0        # time samples per Nyquist interval of the retained band
    period_factor: int = 64        # FFT period in units of T
    leak_tol: float = 1e-6
    precision_tol: float = 1e-3    # tolerated round-off in the pairings
    s_max: float | None = None
    n_intervals: int | None = None
    kappa: float | None = None
    drop: float = 40.0             # band edge where |G| fell by e^{-drop} below its peak


def _node_data(fs, atoms):
    nodes = []
    for a in atoms:
        if a.node not in [n for n, _ in nodes]:
            nodes.append((a.node, a.lam))
    return nodes


def _log_h_envelope(mult, sig, lam_j, others, logPib):
    w = sig + lam_j.real - lam_j
    d = others - lam_j
    lf = _log_f1(w, d).real
    lp = mult.log_p_real(sig).real
    return lf + lp - logPib + np.log1p(np.abs(w))


def _band_edge(fs, nodes, mult_factory, T, cfg):
    """Smallest S such that every log|G_j| stays e^{-drop} below its peak for |sigma| >= S."""
    lam = np.array([l for _, l in nodes])
    S = 20.0 * (1 + np.max(np.abs(lam)))
    peak = -np.inf
    for _ in range(12):
        mult = mult_factory(S)
        sig = np.linspace(-S, S, 8001)
        inner = sig[np.abs(sig) <= S / 2]
        outer = sig[np.abs(sig) > S / 2]
        worst_outer = -np.inf
        for j, lj in enumerate(lam):
            others = np.delete(lam, j)
            logPib = float(mult.log_p(1j * lj.imag).real)
            e_in = _log_h_envelope(mult, inner, lj, others, logPib)
            e_out = _log_h_envelope(mult, outer, lj, others, logPib)
            peak = max(peak, float(np.max(e_in)))
            worst_outer = max(worst_outer, float(np.max(e_out)))
        if worst_outer < peak - cfg.drop:
            return S / 2, peak
        S *= 2
    return S / 2, peak


def build_biortho_analytic(fs: FrequencySet, indices, T: float, grids: SamplingConfig | None = None,
                           with_t_terms: bool = False) -> BiorthFamily:
    """Duals from interpolating products damped by the multiplier, inverted by FFT."""
    cfg = grids or SamplingConfig()
    if not T > 0:
        raise ConfigError(f"T must be positive, got {T}")
    if cfg.period_factor < 64:
        raise GridAliased(f"period factor {cfg.period_factor} gives a frequency step above pi/(32 T)")
    atoms = tuple(atoms_for(fs, indices, with_t_terms))
    if not atoms:
        t = np.linspace(0.0, T, 3)
        return BiorthFamily(T, (), t, {}, {}, Strategy.ANALYTIC, 0.0, {})
    kappa = cfg.kappa if cfg.kappa is not None else classify_regime(fs.params).kappa
    kt = (1 + kappa) / 2
    nodes = _node_data(fs, atoms)

    def factory(S):
        return build_multiplier(T, kappa, s_max=S, check=False)

    if cfg.s_max is None:
        S, peak = _band_edge(fs, nodes, factory, T, cfg)
    else:
        S, peak = float(cfg.s_max), None
    if peak is not None and peak > 700:
        raise PrecisionLoss(f"dual transforms reach e^{peak:.0f}; float64 cannot resolve the pairings")

    m = int(np.ceil(cfg.oversample * S * T / np.pi))
    m = _pow2(max(m, cfg.n_intervals or 0, _default_intervals(fs, T)))
    dt = T / m
    n_fft = cfg.period_factor * m
    ds = 2 * np.pi / (n_fft * dt)
    if ds > np.pi / (32 * T) * (1 + 1e-12):
        raise GridAliased(f"frequency step {ds:.3g} too coarse for T={T}")
    mult = build_multiplier(T, kappa, s_max=S, check=False)
    idx = np.arange(n_fft)
    sig_all = (idx - n_fft // 2) * ds
    band = np.abs(sig_all) <= S
    lo = int(np.argmax(band))
    sig = sig_all[band]
    logP = mult.log_p_real(sig)

    def spectra(node_item):
        node, lj = node_item
        others = np.array([l for n, l in nodes if n != node], dtype=complex)
        d = others - lj
        w = sig + lj.real - lj
        logPib = float(mult.log_p(1j * lj.imag).real)
        r = complex(mult.dlog_p(1j * lj.imag))
        logG1 = _log_f1(w, d) + logP - logPib
        if np.max(logG1.real) > 700:
            raise PrecisionLoss(f"node {node}: transform magnitude e^{np.max(logG1.real):.0f} overflows")
        G1 = np.exp(logG1)
        G2 = w * G1
        return node, lj, G1 - r * G2, 1j * G2

    specs = {node: (lj, H1, H2) for node, lj, H1, H2 in pmap(spectra, nodes)}

    def transform(H, lj, factor):
        n = n_fft * factor
        buf = np.zeros(n, dtype=complex)
        # keep the band centred at zero frequency on the refined grid
        off = (n - n_fft) // 2
        buf[off + lo: off + lo + H.size] = H
        mm = np.arange(n)
        g_bar = (ds / (2 * np.pi)) * np.where(mm % 2 == 0, 1.0, -1.0) * np.fft.fft(buf)
        tt = mm * (dt / factor)
        tt = np.where(mm > n // 2, tt - n * dt / factor, tt)
        g_bar = g_bar * np.exp(-1j * lj.real * tt)
        inside = slice(0, m * factor + 1)
        total = np.sum(np.abs(g_bar) ** 2)
        leak = np.sqrt(max(total - np.sum(np.abs(g_bar[inside]) ** 2), 0.0) / total) if total > 0 else 0.0
        return np.conj(g_bar[inside]), float(leak)

    def sampler(factor):
        t = np.linspace(0.0, T, m * factor + 1)
        duals, leaks = {}, {}
        for a in atoms:
            lj, H1, H2 = specs[a.node]
            g, leak = transform(H1 if a.power == 0 else H2, lj, factor)
            duals[a.ident] = g
            leaks[a.ident] = leak
        return t, duals, leaks

    t, duals, leaks = sampler(1)
    worst_leak = max(leaks.values())
    if worst_leak > cfg.leak_tol:
        raise SupportLeak(f"relative mass outside [0, T] is {worst_leak:.2e} > {cfg.leak_tol:.1e}")
    l1 = max(float(np.sum(np.abs(specs[a.node][1 if a.power == 0 else 2]))) * ds / (2 * np.pi) for a in atoms)
    roundoff = np.finfo(float).eps * l1 * T
    if roundoff > cfg.precision_tol:
        raise PrecisionLoss(f"expected pairing round-off {roundoff:.2e} exceeds {cfg.precision_tol:.1e}")
    meta = {
        "band_edge": S, "dt": dt, "ds": ds, "n_fft": n_fft, "kappa": kappa, "kappa_tilde": kt,
        "delta": mult.delta, "head_terms": mult.n_terms, "leak": leaks and {str(k): v for k, v in leaks.items()},
        "max_leak": worst_leak, "roundoff_estimate": float(roundoff),
        "product_nodes": [int(n) for n, _ in nodes],
    }
    fam = BiorthFamily(T, atoms, t, duals, _l2_norms(t, duals, smooth=False), Strategy.ANALYTIC, None, meta,
                       lambda f: sampler(f)[:2], None)
    return fam


# ---------------------------------------------------------------- verification

@dataclass
class ResidualReport:
    max_deviation: float
    matrix: np.ndarray
    atoms: tuple

    def to_dict(self):
        return {"max_deviation": self.max_deviation,
                "atoms": [[a.key, a.power] for a in self.atoms]}


def verify_biorthogonality(fam: BiorthFamily, fs: FrequencySet | None = None, factor: int = 4,
                           record: bool = True) -> ResidualReport:
    """max |<g_a, t^p e^{i lambda_b t}> - delta_ab| by Simpson quadrature on a refined grid."""
    if not fam.atoms:
        return ResidualReport(0.0, np.zeros((0, 0)), ())
    t, duals = fam.sample(factor)
    B = _basis_double(fam.atoms, t)
    Gd = np.array([duals[a.ident] for a in fam.atoms])
    # FFT-synthesized samples carry round-off that Richardson extrapolation would amplify
    smooth = fam.strategy is Strategy.GRAM
    Bc = np.conj(B)
    M = np.array([integrate(g[None, :] * Bc, t, smooth=smooth) for g in Gd])
    dev = float(np.max(np.abs(M - np.eye(len(fam.atoms)))))
    if record:
        fam.residual = dev
    return ResidualReport(dev, M, fam.atoms)


def fit_norm_bound(fam: BiorthFamily, kappa: float, j_min: int = 5, j_max: int | None = None) -> dict:
    """Fit log||g_j|| <= C3 (Im lambda_j)^kappa + log C2 per branch (power-0 duals).

    C3 is the least-squares slope over modes j_min <= |j| <= j_max (default
    half the largest mode, avoiding truncation effects at the top); log C2 is
    the smallest offset that makes the bound hold on every mode.
    """
    out = {}
    top = max(abs(a.node) for a in fam.atoms)
    j_max = top // 2 if j_max is None else j_max
    for name, sign in (("plus", 1), ("minus", -1)):
        sel = [a for a in fam.atoms if a.power == 0 and np.sign(a.key) == sign]
        if not sel:
            continue
        x = np.array([a.lam.imag ** kappa for a in sel])
        y = np.log([fam.norms[a.ident] for a in sel])
        j = np.array([abs(a.key) for a in sel])
        win = (j >= j_min) & (j <= j_max)
        if win.sum() < 2:
            continue
        C3, _ = np.polyfit(x[win], y[win], 1)
        logC2 = float(np.max(y - C3 * x))
        out[name] = {"C3": float(C3), "C2": float(np.exp(logC2)), "log_C2": logC2,
                     "window": [int(j_min), int(j_max)]}
    return out
