"""Moment targets, control profiles and null-control synthesis.

For mode ``n`` the forced response at time T is governed by the moments
``int_0^T F_n(s) e^{lambda (T - s)} ds`` (and ``(T - s) e^{lambda (T - s)}`` for
a double root).  Steering to rest means these moments must cancel the
corresponding combinations of the free endpoint.  After the substitution
``tau = T - s`` and ``lambda = i lambda_k`` they become exponential moments
``int_0^T f(tau) e^{i lambda_k tau} d tau``, solved with a biorthogonal family.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson

from ._io import cplx
from .beamsim import ForcingSpec, duhamel_mode, simulate
from .biortho import (BiorthFamily, SamplingConfig, Strategy, atoms_for, build_biortho_analytic,
                      build_biortho_gram, gram_matrix, least_norm_value, verify_biorthogonality)
from .errors import (ConfigError, CutoffTooLarge, DegenerateGap, IllConditioned, RegimeMismatch,
                     SubsetNotSeparated, TailDominant, UnresolvableCluster)
from .modal import (BeamState, EndpointState, energy_norms, free_state, phi_hat, restriction_norm,
                    spatial_biortho_pair)
from .spectrum import ClusterMap, FrequencySet, Regime, classify_regime, cluster_map, frequency_set

GAP_TOL = 1e-12
SEPARATION_RTOL = 1e-8
# controls are sampled this much finer than the simulator's step bound; the
# quadratic product rule then resolves them to ~1e-8 relative energy
GRID_REFINE = 4


# ---------------------------------------------------------------- moments

@dataclass(frozen=True)
class MomentData:
    zeta: dict
    T: float

    def targets(self) -> dict:
        """Values the control moments must take to cancel the free endpoint."""
        return {k: -z for k, z in self.zeta.items()}

    def to_dict(self):
        return {"T": self.T, "zeta": {str(k): cplx(v) for k, v in sorted(self.zeta.items())}}


def moment_targets(endpoint: EndpointState, fs: FrequencySet) -> MomentData:
    """Exponential moments of the endpoint, keyed like the frequency set.

    Key +n carries the moment paired with the + root (``e^{lambda+ t}``) and
    key -n the one paired with the - root.  For a double root key +n pairs
    with ``e^{lambda t}`` and key -n with ``t e^{lambda t}``.
    """
    if endpoint.n_modes != fs.n_modes:
        raise ConfigError(f"endpoint has {endpoint.n_modes} modes, frequency set has {fs.n_modes}")
    zeta = {}
    for n in range(1, fs.n_modes + 1):
        r = fs.root(n)
        g1, g2 = complex(endpoint.gamma1[n - 1]), complex(endpoint.gamma2[n - 1])
        lp, lm = r.lambda_plus, r.lambda_minus
        if r.is_double:
            zeta[n] = g2 - lp * g1
            zeta[-n] = g1
            continue
        if abs(r.q) <= GAP_TOL * max(1.0, abs(lp)):
            raise DegenerateGap(f"mode {n}: gap {abs(r.q):.2e} vanishes but the root is not flagged double")
        z1 = r.q * (g1 - g2 / lp) / (-1 + lm / lp)   # pairs with lambda-
        z2 = r.q * (g1 - g2 / lm) / (1 - lp / lm)    # pairs with lambda+
        zeta[n] = z2
        zeta[-n] = z1
    return MomentData(dict(sorted(zeta.items())), float(endpoint.T))


def endpoint_from_moments(md: MomentData, fs: FrequencySet) -> EndpointState:
    """Inverse of moment_targets."""
    g1 = np.zeros(fs.n_modes, dtype=complex)
    g2 = np.zeros(fs.n_modes, dtype=complex)
    for n in range(1, fs.n_modes + 1):
        r = fs.root(n)
        zp, zm = md.zeta.get(n, 0j), md.zeta.get(-n, 0j)
        if r.is_double:
            g1[n - 1] = zm
            g2[n - 1] = zp + r.lambda_plus * zm
        else:
            g1[n - 1] = (zp - zm) / r.q
            g2[n - 1] = (r.lambda_plus * zp - r.lambda_minus * zm) / r.q
    return EndpointState(g1, g2, md.T)


# ---------------------------------------------------------------- profiles

RULE_FREE = "unclustered"      # mode not heading a cluster: first input
RULE_HEAD = "cluster-head"     # partner is unclustered on the plus side: second input
RULE_CHAIN = "chain"           # inside a chain of clusters: alternate along the chain


@dataclass(frozen=True)
class Profiles:
    h1: np.ndarray
    h2: np.ndarray
    assignment_log: dict

    def active(self, which: int) -> list[int]:
        h = self.h1 if which == 1 else self.h2
        return [n + 1 for n in np.flatnonzero(h)]

    def to_dict(self):
        return {"h1": self.h1.tolist(), "h2": self.h2.tolist(),
                "assignment_log": {str(k): v for k, v in sorted(self.assignment_log.items())}}


def synthesize_profiles(fs: FrequencySet, cm: ClusterMap) -> Profiles:
    """Give every mode exactly one active input (magnitude 1/n) so that cluster partners never share one.

    Along a chain n -> iota(n) -> iota(iota(n)) ... the inputs must alternate.
    The chain ends at a mode without a plus-side cluster, which takes the
    first input; so a mode takes the first input exactly when its distance
    to that end is even.  Closed chains are 2-colored from their smallest
    member and are unresolvable when their length is odd.
    """
    N = fs.n_modes
    h1 = np.zeros(N)
    h2 = np.zeros(N)
    log = {}
    iota = dict(cm.iota)
    for n in range(1, N + 1):
        if n not in cm.n_plus:
            which, rule = 1, RULE_FREE
        else:
            dist, cur, seen = 0, n, {n}
            while cur in iota:
                cur = iota[cur]
                dist += 1
                if cur in seen:
                    break
                seen.add(cur)
            if cur in iota:  # closed chain
                cycle = _cycle_from(n, iota)
                if len(cycle) % 2:
                    raise UnresolvableCluster(f"odd closed chain of clusters {sorted(cycle)}")
                start = min(cycle)
                which = 1 + (_steps(start, n, iota) % 2)
                rule = RULE_CHAIN
            else:
                which = 1 if dist % 2 == 0 else 2
                rule = RULE_HEAD if n not in cm.n_both else RULE_CHAIN
        (h1 if which == 1 else h2)[n - 1] = 1.0 / n
        log[n] = rule
    prof = Profiles(h1, h2, log)
    _check_split(prof, cm)
    return prof


def _cycle_from(n, iota):
    out, cur = [n], iota[n]
    while cur != n:
        out.append(cur)
        cur = iota[cur]
    return out


def _steps(a, b, iota):
    k, cur = 0, a
    while cur != b:
        cur = iota[cur]
        k += 1
    return k


def _check_split(prof: Profiles, cm: ClusterMap):
    for n, m in cm.iota.items():
        if (prof.h1[n - 1] and prof.h1[m - 1]) or (prof.h2[n - 1] and prof.h2[m - 1]):
            raise UnresolvableCluster(f"cluster ({n}, {m}) shares an input")


# ---------------------------------------------------------------- controls

class ControlKind(str, enum.Enum):
    SCALAR_1D = "Scalar1D"
    SCALAR_2D = "Scalar2D"
    INTERIOR = "Interior"
    WEAK = "Weak"


@dataclass
class ControlSignal:
    kind: ControlKind
    t: np.ndarray
    f1: np.ndarray | None = None
    f2: np.ndarray | None = None
    x: np.ndarray | None = None
    f_xt: np.ndarray | None = None
    norm: float = 0.0
    profiles: Profiles | None = None
    interval: tuple | None = None
    meta: dict = field(default_factory=dict)

    @property
    def T(self) -> float:
        return float(self.t[-1])

    def forcing(self) -> ForcingSpec:
        if self.kind is ControlKind.INTERIOR:
            return ForcingSpec.patch(self.t, self.x, self.f_xt)
        return ForcingSpec.profiled(self.t, self.f1, self.profiles.h1, self.f2, self.profiles.h2)

    def manifest(self) -> dict:
        out = {"kind": self.kind.value, "T": self.T, "norm": self.norm, "n_samples": len(self.t),
               "meta": self.meta}
        if self.profiles is not None:
            out["profiles"] = self.profiles.to_dict()
        if self.interval is not None:
            out["interval"] = list(self.interval)
        return out


def _signal_norm(t, *signals) -> float:
    return float(np.sqrt(sum(simpson(np.abs(s) ** 2, x=t) for s in signals if s is not None)))


def check_separated(fs: FrequencySet, atoms, rtol: float = SEPARATION_RTOL):
    """Raise SubsetNotSeparated when two distinct atoms share a frequency (same power)."""
    scale = max([1.0] + [abs(a.lam) for a in atoms])
    for i, a in enumerate(atoms):
        for b in atoms[i + 1:]:
            if a.power == b.power and abs(a.lam - b.lam) <= rtol * scale:
                raise SubsetNotSeparated(
                    f"frequencies of keys {a.key} and {b.key} coincide ({abs(a.lam - b.lam):.1e}); split the inputs")


def _scalar_signal(md: MomentData, h, fam: BiorthFamily):
    """f(t) = sum_a target_a / h_a conj(g_a(T - t)) together with the tail estimate."""
    targets = md.targets()
    weights = {}
    for a in fam.atoms:
        hn = h[abs(a.key) - 1]
        if hn == 0:
            raise ConfigError(f"mode {abs(a.key)} has no active profile in this subset")
        weights[a.ident] = targets.get(a.key, 0j) / hn
    t = fam.time_grid
    if not any(weights.values()):
        return t, np.zeros(len(t)), weights, 0.0
    ftil = fam.combine(weights)
    f = ftil[::-1]
    imag = float(np.max(np.abs(f.imag)) / max(np.max(np.abs(f)), 1e-300))
    return t, f.real.copy(), weights, imag


def _tail_estimate(weights, fam: BiorthFamily, norm: float) -> float:
    if norm == 0 or not fam.atoms:
        return 0.0
    top = max(abs(a.key) for a in fam.atoms)
    tail = sum(abs(weights[a.ident]) * fam.norms[a.ident] for a in fam.atoms if abs(a.key) == top)
    return tail / norm


def control_1d(md: MomentData, h1, fam: BiorthFamily, fs: FrequencySet | None = None,
               tail_tol: float = 1e-6) -> ControlSignal:
    """Single input f1 with spatial profile h1 (sine coefficients)."""
    h1 = np.asarray(h1, dtype=float)
    check_separated(fs, list(fam.atoms))
    if fs is not None:
        regime = classify_regime(fs.params).regime
        if regime is not Regime.ONE_DIM:
            raise RegimeMismatch(f"one-input synthesis needs the one-dimensional regime, got {regime.value}")
    t, f1, weights, imag = _scalar_signal(md, h1, fam)
    norm = _signal_norm(t, f1)
    tail = _tail_estimate(weights, fam, norm)
    if tail > tail_tol:
        raise TailDominant(f"top-mode contribution is {tail:.2e} of the control norm (> {tail_tol:.0e})")
    meta = {"strategy": fam.strategy.value, "family_residual": fam.residual, "imag_fraction": imag,
            "tail_estimate": tail}
    if fam.strategy is Strategy.GRAM:
        meta["least_norm"] = least_norm_value(fam, weights)
        meta["gram_cond"] = fam.meta.get("cond")
    prof = Profiles(h1, np.zeros_like(h1), {n + 1: RULE_FREE for n in range(len(h1))})
    return ControlSignal(ControlKind.SCALAR_1D, t, f1, np.zeros_like(f1), norm=norm, profiles=prof, meta=meta)


def control_2d(md: MomentData, profiles: Profiles, fams: dict, fs: FrequencySet | None = None) -> ControlSignal:
    """Two inputs; fams[1] covers the modes driven by h1, fams[2] those driven by h2."""
    if fs is not None:
        regime = classify_regime(fs.params).regime
        if regime not in (Regime.TWO_DIM, Regime.ONE_DIM):
            raise RegimeMismatch(f"two-input synthesis does not apply to the {regime.value} regime")
    signals, meta = {}, {}
    t = None
    for which, h in ((1, profiles.h1), (2, profiles.h2)):
        fam = fams.get(which)
        if fam is None or not fam.atoms:
            continue
        check_separated(fs, list(fam.atoms))
        t_w, f, weights, imag = _scalar_signal(md, h, fam)
        if t is not None and (len(t) != len(t_w) or not np.allclose(t, t_w)):
            raise ConfigError("subset families must share the time grid")
        t = t_w
        signals[which] = f
        meta[f"input{which}"] = {"strategy": fam.strategy.value, "family_residual": fam.residual,
                                 "imag_fraction": imag, "keys": [a.key for a in fam.atoms]}
        if fam.strategy is Strategy.GRAM:
            meta[f"input{which}"]["least_norm"] = least_norm_value(fam, weights)
            meta[f"input{which}"]["gram_cond"] = fam.meta.get("cond")
    if t is None:
        t = next(iter(fams.values())).time_grid
    zero = np.zeros(len(t))
    f1, f2 = signals.get(1, zero), signals.get(2, zero)
    return ControlSignal(ControlKind.SCALAR_2D, t, f1, f2, norm=_signal_norm(t, f1, f2), profiles=profiles,
                         meta=meta)


def split_keys(fs: FrequencySet, profiles: Profiles, modes=None) -> dict:
    modes = range(1, fs.n_modes + 1) if modes is None else modes
    out = {1: [], 2: []}
    for n in modes:
        which = 1 if profiles.h1[n - 1] else 2
        out[which] += [n, -n]
    return out


def build_family(fs: FrequencySet, keys, T: float, strategy: Strategy | str = Strategy.GRAM,
                 n_intervals: int | None = None, max_cond: float = 1e12,
                 grids: SamplingConfig | None = None) -> BiorthFamily:
    strategy = Strategy(strategy)
    if strategy is Strategy.GRAM:
        fam = build_biortho_gram(fs, keys, T, n_intervals=n_intervals, max_cond=max_cond)
    else:
        grids = grids or SamplingConfig(n_intervals=n_intervals)
        fam = build_biortho_analytic(fs, keys, T, grids)
    verify_biorthogonality(fam, fs)
    return fam


def control_intervals(fs: FrequencySet, T: float) -> int:
    return GRID_REFINE * (build_biortho_gram(fs, [], T).time_grid.size - 1)


def _response_energy(md: MomentData, fs: FrequencySet, forcing: ForcingSpec):
    """X^2 and X^0 norms of free endpoint plus the response to forcing, via Duhamel."""
    ep = endpoint_from_moments(md, fs)
    a, ap = ep.gamma1.copy(), ep.gamma2.copy()
    fn = forcing.fourier(fs.n_modes)
    for n in range(1, fs.n_modes + 1):
        da, dap = duhamel_mode(n, fn[n - 1], forcing.t, fs, md.T)
        a[n - 1] += da
        ap[n - 1] += dap
    return energy_norms(EndpointState(a, ap, md.T))


def _truncated(profiles: Profiles, M: int) -> Profiles:
    h1, h2 = profiles.h1.copy(), profiles.h2.copy()
    h1[M:] = 0.0
    h2[M:] = 0.0
    return Profiles(h1, h2, profiles.assignment_log)


def weak_control(md: MomentData, profiles: Profiles, eps: float, fs: FrequencySet, T: float,
                 max_cond: float = 1e30) -> ControlSignal:
    """Steer the endpoint energy (X^2 + X^0 norms) below eps by cancelling the modes up to a cutoff M.

    The cutoff starts at the smallest M whose free tail energy is below eps/2
    and grows until the re-simulated endpoint energy is below eps.  The input
    profiles are truncated to the first M modes, so the control leaves the
    tail to decay freely.
    """
    if not eps > 0:
        raise ConfigError(f"eps must be positive, got {eps}")
    regime = classify_regime(fs.params).regime
    if regime is not Regime.WEAK_ONLY:
        raise RegimeMismatch(f"weak steering targets the WeakOnly regime, got {regime.value}")
    ep = endpoint_from_moments(md, fs)
    N = fs.n_modes

    def tail_energy(M):
        x2, x0 = energy_norms(EndpointState(np.concatenate([np.zeros(M), ep.gamma1[M:]]),
                                            np.concatenate([np.zeros(M), ep.gamma2[M:]]), T))
        return x2 + x0

    M = next((m for m in range(N + 1) if tail_energy(m) < eps / 2), N)
    n_int = control_intervals(fs, T)
    t = np.linspace(0.0, T, n_int + 1)
    history = []
    best = None
    while True:
        if M == 0:
            ctrl = ControlSignal(ControlKind.WEAK, t, np.zeros(len(t)), np.zeros(len(t)), norm=0.0,
                                 profiles=_truncated(profiles, 0))
        else:
            keys = split_keys(fs, profiles, range(1, M + 1))
            try:
                fams = {w: build_biortho_gram(fs, k, T, n_intervals=n_int, max_cond=max_cond)
                        for w, k in keys.items() if k}
                for fam in fams.values():
                    verify_biorthogonality(fam, fs)
            except IllConditioned as exc:
                achieved = best[1] if best else tail_energy(0)
                raise CutoffTooLarge(f"cutoff {M} is ill conditioned ({exc}); achieved energy {achieved:.3e}") from exc
            ctrl = control_2d(md, _truncated(profiles, M), fams)
            ctrl.kind = ControlKind.WEAK
        x2, x0 = _response_energy(md, fs, ctrl.forcing())
        energy = x2 + x0
        history.append({"cutoff": M, "energy": energy, "norm": ctrl.norm})
        if best is None or energy < best[1]:
            best = (ctrl, energy)
        if energy < eps:
            ctrl.meta.update(cutoff=M, endpoint_energy=energy, tail_energy=tail_energy(M), history=history)
            return ctrl
        if M >= N:
            raise CutoffTooLarge(f"all {N} modes cancelled but energy {energy:.3e} >= eps={eps:.1e}")
        M += 1


# ---------------------------------------------------------------- interior control

def interior_atoms(fs: FrequencySet, cm: ClusterMap):
    """Temporal atoms over the frequency set with the minus-side member of each cluster removed."""
    dropped = {-m for _, m in cm.pairs}
    return [k for k in fs.keys if k not in dropped]


def _spatial_factors(fs, cm, interval, x, pairs):
    """Spatial factor (on grid x) and temporal atom for every moment key."""
    a, b = interval
    spatial, temporal = {}, {}
    by_l = {l: m for l, m in cm.pairs}
    by_m = {m: l for l, m in cm.pairs}
    for k in fs.keys:
        n = abs(k)
        if k > 0 and n in by_l:
            sp = pairs[(n, by_l[n])]
            spatial[k] = sp.evaluate(0, x)
            temporal[k] = k
        elif k < 0 and n in by_m:
            l = by_m[n]
            sp = pairs[(l, n)]
            spatial[k] = sp.evaluate(1, x)
            temporal[k] = l
        else:
            spatial[k] = phi_hat(n, x, a, b)
            temporal[k] = k
    return spatial, temporal


def control_interior(md: MomentData, fs: FrequencySet, cm: ClusterMap, interval, time_fam: BiorthFamily,
                     pairs: dict, n_x: int = 401) -> ControlSignal:
    """Space-time control supported on the patch (a, b)."""
    if fs.params.alpha >= 1.5:
        raise RegimeMismatch("interior synthesis needs alpha < 3/2")
    a, b = interval
    if not (0 <= a < b <= np.pi):
        raise ConfigError(f"invalid interval ({a}, {b})")
    x = np.linspace(a, b, n_x + (n_x % 2 == 0))
    spatial, temporal = _spatial_factors(fs, cm, interval, x, pairs)
    atom_of = {a_.key: a_ for a_ in time_fam.atoms}
    targets = md.targets()
    t = time_fam.time_grid
    f = np.zeros((len(t), len(x)))
    coefs = {}
    for k in fs.keys:
        c = targets.get(k, 0j) / float(restriction_norm(abs(k), a, b))
        coefs[k] = c
        if c == 0:
            continue
        atom = atom_of[temporal[k]]
        theta_conj = time_fam.combine({atom.ident: 1.0})[::-1]  # conj(theta(T - t))
        f += np.real(c * np.outer(theta_conj, spatial[k]))
    norm = float(np.sqrt(simpson(simpson(f ** 2, x=x, axis=1), x=t)))
    meta = {"strategy": time_fam.strategy.value, "family_residual": time_fam.residual,
            "clusters": [list(p) for p in cm.pairs]}
    return ControlSignal(ControlKind.INTERIOR, t, x=x, f_xt=f, norm=norm, interval=(a, b), meta=meta)


def interior_cross_residual(fs: FrequencySet, cm: ClusterMap, interval, time_fam: BiorthFamily, pairs: dict,
                            n_x: int = 801) -> float:
    """max |<h_j, phi_hat_k e_k> - delta_jk| by Simpson in space times the family's time quadrature."""
    from .biortho import integrate
    a, b = interval
    x = np.linspace(a, b, n_x + (n_x % 2 == 0))
    spatial, temporal = _spatial_factors(fs, cm, interval, x, pairs)
    t, duals = time_fam.sample(1)
    atom_of = {a_.key: a_ for a_ in time_fam.atoms}
    keys = fs.keys
    # the moment for key k pairs with t^p e^{i lambda_k t}; double modes carry p = 1 on the minus key
    basis = {}
    for k in keys:
        n = abs(k)
        p = 1 if (k < 0 and n in fs.double_modes) else 0
        basis[k] = (phi_hat(n, x, a, b), t ** p * np.exp(1j * fs.lam(k) * t))
    smooth = time_fam.strategy is Strategy.GRAM
    worst = 0.0
    for j in keys:
        theta = duals[atom_of[temporal[j]].ident]
        for k in keys:
            sx = simpson(spatial[j] * basis[k][0], x=x)
            st = integrate(theta * np.conj(basis[k][1]), t, smooth=smooth)
            worst = max(worst, abs(sx * st - (1.0 if j == k else 0.0)))
    return float(worst)


# ---------------------------------------------------------------- orchestration

@dataclass
class Synthesis:
    control: ControlSignal
    fs: FrequencySet
    regime: Regime
    moments: MomentData
    cluster_map: ClusterMap | None = None
    families: dict = field(default_factory=dict)


def synthesize(params, state: BeamState, T: float, strategy="gram", epsilon: float | None = None,
               interval=None, eps_weak: float = 1e-3, force: str | None = None, max_cond: float = 1e12,
               grids: SamplingConfig | None = None) -> Synthesis:
    """Pick the construction that fits the regime and build a null (or eps-) control.

    ``force`` may be "1d" or "2d" to bypass the regime choice.
    """
    fs = frequency_set(params)
    if state.n_modes != fs.n_modes:
        state = state.padded(fs.n_modes)
    report = classify_regime(params)
    md = moment_targets(free_state(state, fs, T), fs)
    strategy = Strategy(strategy)
    n_int = control_intervals(fs, T)

    if interval is not None:
        cm = cluster_map(fs, epsilon)
        keys = interior_atoms(fs, cm)
        fam = build_family(fs, keys, T, strategy, n_int, max_cond, grids)
        pairs = {(l, m): spatial_biortho_pair(l, m, *interval) for l, m in cm.pairs}
        ctrl = control_interior(md, fs, cm, tuple(interval), fam, pairs)
        ctrl.meta["cross_residual"] = interior_cross_residual(fs, cm, tuple(interval), fam, pairs)
        return Synthesis(ctrl, fs, report.regime, md, cm, {0: fam})

    mode = force or {Regime.ONE_DIM: "1d", Regime.TWO_DIM: "2d", Regime.WEAK_ONLY: "weak"}.get(report.regime)
    if mode is None:
        raise RegimeMismatch(f"no control synthesis for the {report.regime.value} regime")
    if mode == "1d":
        h1 = 1.0 / np.arange(1, fs.n_modes + 1)
        check_separated(fs, atoms_for(fs, fs.keys))
        if report.regime is not Regime.ONE_DIM:
            raise RegimeMismatch(f"one-input synthesis needs the one-dimensional regime, got {report.regime.value}")
        fam = build_family(fs, fs.keys, T, strategy, n_int, max_cond, grids)
        ctrl = control_1d(md, h1, fam, fs)
        return Synthesis(ctrl, fs, report.regime, md, None, {1: fam})
    cm = cluster_map(fs, epsilon)
    prof = synthesize_profiles(fs, cm)
    if mode == "weak":
        ctrl = weak_control(md, prof, eps_weak, fs, T)
        return Synthesis(ctrl, fs, report.regime, md, cm, {})
    if report.regime not in (Regime.TWO_DIM, Regime.ONE_DIM):
        raise RegimeMismatch(f"two-input synthesis does not apply to the {report.regime.value} regime")
    keys = split_keys(fs, prof)
    fams = {w: build_family(fs, k, T, strategy, n_int, max_cond, grids) for w, k in keys.items() if k}
    ctrl = control_2d(md, prof, fams, fs)
    return Synthesis(ctrl, fs, report.regime, md, cm, fams)


def verify_control(state: BeamState, control: ControlSignal, fs: FrequencySet):
    """Re-simulate with the independent solver."""
    if state.n_modes != fs.n_modes:
        state = state.padded(fs.n_modes)
    return simulate(state, control.forcing(), fs, control.T)


# ---------------------------------------------------------------- cost sweep

def least_norm_cost(fs: FrequencySet, md: MomentData, h, T: float) -> float:
    """Exact least-norm L^2 cost of the single-input control, from the Gram matrix alone (no sampling)."""
    import mpmath

    atoms = atoms_for(fs, fs.keys)
    tg = md.targets()
    w = [tg[a.key] / h[abs(a.key) - 1] for a in atoms]
    G = gram_matrix(atoms, T)
    cond = float(np.linalg.cond(G))
    if cond <= 1e6:
        wv = np.array(w, dtype=complex)
        return float(np.sqrt(max(np.real(np.conj(wv) @ np.linalg.solve(G, wv)), 0.0)))
    with mpmath.workdps(30 + int(min(np.log10(cond), 300))):
        Gm = gram_matrix(atoms, T, mp=mpmath.mp)
        wm = mpmath.matrix([mpmath.mpc(z.real, z.imag) for z in map(complex, w)])
        x = mpmath.lu_solve(Gm, wm)
        val = mpmath.fsum(mpmath.conj(wm[i]) * x[i] for i in range(len(w)))
        return float(mpmath.sqrt(max(mpmath.re(val), 0)))


@dataclass
class CostReport:
    T: list
    norms: list
    fits: dict
    best_exponent: float | None
    monotone: bool
    details: list = field(default_factory=list)

    def to_dict(self):
        return {"T": self.T, "norms": self.norms, "fits": {str(k): v for k, v in self.fits.items()},
                "best_exponent": self.best_exponent, "monotone": self.monotone, "details": self.details}


def candidate_exponents(alpha: float) -> list[float]:
    out = [1.0, 2.0]
    if 1 < alpha < 1.5:
        out += [1 / (3 * alpha - 2), 1 / (3 - 2 * alpha)]
    return out


def fit_cost(T_list, norms, exponents) -> dict:
    """Least-squares fit log||f|| = a + b T^{-gamma}; residual is the RMS misfit."""
    T = np.asarray(T_list, dtype=float)
    y = np.log(np.asarray(norms, dtype=float))
    fits = {}
    for g in exponents:
        X = np.column_stack([np.ones_like(T), T ** (-g)])
        if len(T) < 2:
            fits[g] = {"a": float(y[0]), "b": 0.0, "rms": 0.0}
            continue
        coef, *_ = np.linalg.lstsq(X, y, rcond=None)
        rms = float(np.sqrt(np.mean((X @ coef - y) ** 2)))
        fits[g] = {"a": float(coef[0]), "b": float(coef[1]), "rms": rms}
    return fits


def cost_sweep(params, state: BeamState, T_list, strategy="gram", exponents=None,
               max_cond: float = 1e40) -> CostReport:
    """Control norm as a function of the horizon, with fits against T^{-gamma}."""
    T_list = [float(T) for T in T_list]
    if any(T <= 0 for T in T_list):
        raise ConfigError("all horizons must be positive")
    norms, details = [], []
    for T in T_list:
        syn = synthesize(params, state, T, strategy=strategy, max_cond=max_cond)
        c = syn.control
        exact = c.meta.get("least_norm")
        norms.append(exact if exact is not None else c.norm)
        details.append({"T": T, "norm": norms[-1], "sampled_norm": c.norm,
                        "gram_cond": c.meta.get("gram_cond"), "regime": syn.regime.value})
    exponents = exponents or candidate_exponents(params.alpha)
    fits = fit_cost(T_list, norms, exponents)
    best = min(fits, key=lambda g: fits[g]["rms"]) if len(T_list) > 1 else None
    order = np.argsort(T_list)[::-1]
    ns = np.array(norms)[order]
    monotone = bool(np.all(np.diff(ns) >= -1e-12 * ns[:-1]))
    return CostReport(T_list, norms, fits, best, monotone, details)
