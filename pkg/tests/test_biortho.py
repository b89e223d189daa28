import numpy as np
import pytest

from beamctl.biortho import (SamplingConfig, atoms_for, build_biortho_analytic, build_biortho_gram,
                             build_multiplier, f_products, fit_norm_bound, fit_nu_majorant, gram_matrix,
                             least_norm_value, t_moment, theta_majorant, verify_biorthogonality)
from beamctl.control import synthesize, verify_control
from beamctl.errors import GridAliased, IllConditioned
from beamctl.modal import BeamState
from beamctl.spectrum import SpectralParams, frequency_set

FS8 = frequency_set(SpectralParams(0.5, 1.0, 8))


@pytest.fixture(scope="module")
def nu():
    return fit_nu_majorant(frequency_set(SpectralParams(0.5, 1.0, 100)), 0.5)


def test_theta_basic(nu):
    assert theta_majorant(nu, 0.0) == 0.0
    for s in (1.0, 10.0, 100.0):
        assert theta_majorant(nu, 2 * s) > theta_majorant(nu, s)


def test_theta_slope(nu):
    s = np.geomspace(1e2, 1e4, 9)
    slope = np.polyfit(np.log(s), np.log([theta_majorant(nu, v) for v in s]), 1)[0]
    assert abs(slope - nu.kappa) <= 0.05


def test_nu_majorant_brackets_count():
    fs = frequency_set(SpectralParams(0.5, 1.0, 60))
    assert fit_nu_majorant(fs, 0.5).validate(fs)


def test_multiplier_values():
    m = build_multiplier(1.0, 0.5, n_terms=400, check=False)
    assert m.p(0.0) == pytest.approx(1.0, abs=1e-14)
    v = m.p(1j).real
    assert 0 < v < 1
    big = build_multiplier(1.0, 0.5, n_terms=200_000, check=False)
    # factors beyond the explicit head contribute exp(-sum a_n) to first order
    direct = np.prod(0.5 * (1 + np.exp(-2 * big.a_seq))) * np.exp(-big.tail[1])
    assert v == pytest.approx(direct, rel=1e-6)


def test_multiplier_real_axis_product():
    m = build_multiplier(1.0, 0.5, n_terms=400, check=False)
    a = m.A * np.arange(1, 2_000_001, dtype=float) ** (-1 / m.kappa_tilde)
    rng = np.random.default_rng(5)
    for s in rng.uniform(0.1, 10.0, size=10):
        direct = np.exp(np.sum(np.log(np.abs(np.cos(a * s)))))
        assert abs(m.p(s)) == pytest.approx(direct, rel=1e-6)
        assert abs(np.exp(m.log_p_real(np.array([s]))[0])) == pytest.approx(direct, rel=1e-6)


def test_multiplier_checks_pass():
    m = build_multiplier(1.0, 0.5, s_max=1e3)
    assert m.decay_exponent > 0.5
    assert np.isfinite(m.C_P) and np.isfinite(m.C4)


def test_f_products():
    for j in (1, -3, 5):
        F1, F2 = f_products(j, FS8, FS8.lam(j))
        assert F1 == pytest.approx(1) and F2 == pytest.approx(0)
        for k in (2, -2, 8):
            if k != j:
                assert abs(f_products(j, FS8, FS8.lam(k))[0]) < 1e-12
        lj = FS8.lam(j)
        h = 1e-6 * abs(lj)
        d = (f_products(j, FS8, lj + h)[1] - f_products(j, FS8, lj - h)[1]) / (2 * h)
        assert d == pytest.approx(1, abs=1e-4)


def test_gram_diagonal_closed_form():
    assert t_moment(1j - np.conj(1j), 0, 1.0).real == pytest.approx((1 - np.exp(-2)) / 2, abs=1e-15)
    atoms = atoms_for(frequency_set(SpectralParams(1.0, 2.0, 1)), [1])
    assert gram_matrix(atoms, 1.0)[0, 0].real == pytest.approx(0.43233235838169365, abs=1e-14)


def test_gram_residual_n12():
    fs = frequency_set(SpectralParams(0.5, 1.0, 12))
    fam = build_biortho_gram(fs, fs.keys, 1.0)
    assert verify_biorthogonality(fam, fs).max_deviation <= 1e-8


def test_gram_double_pairings():
    fs = frequency_set(SpectralParams(1.0, 2.0, 3))
    fam = build_biortho_gram(fs, fs.keys, 1.0, with_t_terms=True)
    rep = verify_biorthogonality(fam, fs)
    assert rep.max_deviation <= 1e-8
    assert sorted(fam.g2) == [1, 2, 3] and sorted(fam.g1) == [1, 2, 3]


def test_gram_norms_and_least_norm():
    fam = build_biortho_gram(FS8, FS8.keys, 1.0)
    from beamctl.biortho import integrate
    for a in fam.atoms[:4]:
        assert fam.norms[a.ident] == pytest.approx(np.sqrt(integrate(np.abs(fam.duals[a.ident]) ** 2,
                                                                      fam.time_grid)), rel=1e-8)
    rng = np.random.default_rng(2)
    w = {a.ident: complex(*rng.normal(size=2)) for a in fam.atoms}
    f = fam.combine(w)
    assert least_norm_value(fam, w) == pytest.approx(np.sqrt(integrate(np.abs(f) ** 2, fam.time_grid)), rel=1e-8)


def test_gram_ill_conditioned():
    fs = frequency_set(SpectralParams(0.5, 1.0, 8))
    with pytest.raises(IllConditioned):
        build_biortho_gram(fs, fs.keys, 0.25, max_cond=1e8)


def test_empty_family():
    fam = build_biortho_gram(FS8, [], 1.0)
    assert verify_biorthogonality(fam).max_deviation == 0


def test_analytic_single_frequency():
    fs = frequency_set(SpectralParams(1.0, 2.0, 1))
    assert fs.lam(1) == pytest.approx(1j)
    fam = build_biortho_analytic(fs, [1], 1.0)
    t, duals = fam.sample(4)
    g = duals[(1, 0)]
    from scipy.integrate import simpson
    assert simpson(g * np.conj(np.exp(1j * fs.lam(1) * t)), x=t) == pytest.approx(1, abs=1e-3)


def test_analytic_alpha_half_n8():
    fam = build_biortho_analytic(FS8, FS8.keys, 1.0)
    assert verify_biorthogonality(fam, FS8).max_deviation <= 1e-3


def test_analytic_double_set():
    fs = frequency_set(SpectralParams(1.0, 2.0, 3))
    fam = build_biortho_analytic(fs, fs.keys, 1.0, with_t_terms=True)
    assert verify_biorthogonality(fam, fs).max_deviation <= 1e-3


def test_analytic_grid_aliased():
    fs = frequency_set(SpectralParams(1.0, 2.0, 1))
    with pytest.raises(GridAliased):
        build_biortho_analytic(fs, [1], 1.0, SamplingConfig(period_factor=8))


def test_strategies_agree_on_controls():
    p = SpectralParams(1.0, 2.0, 3)
    st = BeamState.eigenmode(1, 3)
    ana = synthesize(p, st, 1.0, strategy="analytic")
    gram = synthesize(p, st, 1.0, strategy="gram")
    ra = verify_control(st, ana.control, ana.fs).relative_energy
    rg = verify_control(st, gram.control, gram.fs).relative_energy
    assert abs(ra - rg) <= 10 * ana.control.meta["family_residual"]


def test_norm_bound_fit_positive():
    fs = frequency_set(SpectralParams(0.5, 1.0, 32))
    fits = fit_norm_bound(build_biortho_gram(fs, fs.keys, 1.0, n_intervals=512), 0.5)
    assert fits["plus"]["C3"] > 0 and fits["minus"]["C3"] > 0
    assert fits["plus"]["window"] == [5, 16]
