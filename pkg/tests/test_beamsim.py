from types import MappingProxyType

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from beamctl.beamsim import ForcingSpec, duhamel_mode, simulate, time_grid
from beamctl.errors import ConfigError, StepTooCoarse
from beamctl.modal import BeamState, energy_norms, free_state
from beamctl.spectrum import FrequencySet, RootPair, SpectralParams, frequency_set


def _ode(p, n, f, T, w0=0.0, w1=0.0):
    b, c = p.rho * n ** (2 * p.alpha), float(n) ** 4
    sol = solve_ivp(lambda t, y: [y[1], f(t) - c * y[0] - b * y[1]], (0, T), [w0, w1], method="DOP853",
                    rtol=1e-13, atol=1e-15, max_step=T / 2000)
    return sol.y[:, -1]


def test_zero_forcing():
    fs = frequency_set(SpectralParams(0.5, 1.0, 3))
    t = time_grid(fs, 1.0)
    assert duhamel_mode(2, np.zeros_like(t), t, fs, 1.0) == (0, 0)


def test_constant_forcing_steady_state():
    # roots -1, -2: a'' + 3a' + 2a = 1 settles at 1/2
    roots = (RootPair(1, -1 + 0j, -2 + 0j, 1 + 0j, False),)
    fs = FrequencySet(SpectralParams(0.0, 1.0, 1), roots, MappingProxyType({-1: 2j, 1: 1j}), frozenset())
    T = 20.0
    t = np.linspace(0, T, 2 ** 12 + 1)
    a, _ = duhamel_mode(1, np.ones_like(t), t, fs, T)
    assert a == pytest.approx(0.5, abs=1e-6)


@pytest.mark.parametrize("alpha, rho", [(0.5, 1.0), (1.0, 2.0), (1.0, 13 / 6), (1.6, 1.0)])
def test_duhamel_matches_ode(alpha, rho):
    p = SpectralParams(alpha, rho, 4)
    fs = frequency_set(p)
    T = 1.0
    t = time_grid(fs, T, min_intervals=4096)
    rng = np.random.default_rng(7)
    c = rng.normal(size=4)

    def f(s):
        return c[0] + c[1] * np.sin(3 * s) + c[2] * np.cos(7 * s) + c[3] * s ** 2

    for n in range(1, 5):
        a, ap = duhamel_mode(n, f(t), t, fs, T)
        ref = _ode(p, n, f, T)
        assert abs(a - ref[0]) <= 1e-8 * max(1, abs(ref[0]))
        assert abs(ap - ref[1]) <= 1e-8 * max(1, abs(ref[1]))


def test_step_too_coarse():
    fs = frequency_set(SpectralParams(0.5, 1.0, 8))
    t = np.linspace(0, 1, 65)
    with pytest.raises(StepTooCoarse):
        duhamel_mode(8, np.ones_like(t), t, fs, 1.0)


def test_grid_validation():
    fs = frequency_set(SpectralParams(0.5, 1.0, 2))
    with pytest.raises(ConfigError):
        duhamel_mode(1, np.ones(1024), np.linspace(0, 1, 1024), fs, 1.0)


def test_none_forcing_matches_free_state():
    fs = frequency_set(SpectralParams(0.5, 1.0, 5))
    rng = np.random.default_rng(0)
    st = BeamState(rng.normal(size=5), rng.normal(size=5))
    res = simulate(st, ForcingSpec.none(), fs, 1.3)
    ep = free_state(st, fs, 1.3)
    np.testing.assert_allclose(res.a_T, ep.gamma1, atol=1e-12)
    np.testing.assert_allclose(res.a_prime_T, ep.gamma2, atol=1e-12)


def test_linearity():
    fs = frequency_set(SpectralParams(0.5, 1.0, 4))
    st = BeamState([1.0, 0.2, 0, 0], [0, 0.5, 0, 0])
    t = time_grid(fs, 1.0)
    h = 1 / np.arange(1, 5)
    fa, fb = np.sin(5 * t), np.exp(-t) * t
    r1 = simulate(st, ForcingSpec.profiled(t, fa, h), fs, 1.0)
    r2 = simulate(st, ForcingSpec.profiled(t, fb, h), fs, 1.0)
    r12 = simulate(st, ForcingSpec.profiled(t, fa + fb, h), fs, 1.0)
    np.testing.assert_allclose(r12.a_T, r1.a_T + r2.a_T - r1.free_a, atol=1e-10)
    np.testing.assert_allclose(r12.a_prime_T, r1.a_prime_T + r2.a_prime_T - r1.free_a_prime, atol=1e-10)


def test_energy_decay_under_zero_forcing():
    fs = frequency_set(SpectralParams(0.5, 1.0, 6))
    st = BeamState(np.ones(6) / np.arange(1, 7) ** 2, np.ones(6))
    energies = [sum(energy_norms(st))]
    for T in (0.25, 0.5, 1.0, 2.0):
        r = simulate(st, ForcingSpec.none(), fs, T)
        energies.append(r.residual_x2 + r.residual_x0)
    assert all(b <= a for a, b in zip(energies, energies[1:]))


def test_mode_count_convergence():
    # band-limited data and forcing: extra modes stay at rest
    st = BeamState([1.0, 0.5], [0.0, 0.2])
    out = []
    for N in (4, 8):
        fs = frequency_set(SpectralParams(0.5, 1.0, N))
        t = time_grid(fs, 1.0)
        h = np.zeros(N)
        h[:2] = [1.0, 0.5]
        r = simulate(st.padded(N), ForcingSpec.profiled(t, np.cos(t), h), fs, 1.0)
        out.append((r.residual_x2, r.residual_x0))
    assert abs(out[0][0] - out[1][0]) < 1e-8 and abs(out[0][1] - out[1][1]) < 1e-8


def test_patch_projection_matches_profiled():
    fs = frequency_set(SpectralParams(0.5, 1.0, 4))
    t = time_grid(fs, 1.0)
    x = np.linspace(0, np.pi, 2001)
    g = np.sin(3 * t)
    patch = ForcingSpec.patch(t, x, np.outer(g, np.sqrt(2 / np.pi) * np.sin(2 * x)))
    prof = ForcingSpec.profiled(t, g, [0, 1, 0, 0])
    np.testing.assert_allclose(patch.fourier(4), prof.fourier(4), atol=1e-12)


def test_history_endpoint_consistent():
    fs = frequency_set(SpectralParams(0.5, 1.0, 3))
    st = BeamState([1.0, 0, 0], [0, 0, 0])
    t = time_grid(fs, 1.0)
    r = simulate(st, ForcingSpec.profiled(t, np.sin(t), [1, 0.5, 0.3]), fs, 1.0, history=True)
    np.testing.assert_allclose(r.history_a[:, -1], r.a_T, atol=1e-10)


def test_threads_give_identical_results(monkeypatch):
    fs = frequency_set(SpectralParams(0.5, 1.0, 6))
    st = BeamState(np.ones(6), np.zeros(6))
    t = time_grid(fs, 1.0)
    fc = ForcingSpec.profiled(t, np.sin(2 * t), 1 / np.arange(1, 7))
    serial = simulate(st, fc, fs, 1.0)
    monkeypatch.setenv("BEAMCTL_THREADS", "4")
    threaded = simulate(st, fc, fs, 1.0)
    assert np.array_equal(serial.a_T, threaded.a_T)
