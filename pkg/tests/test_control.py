from types import MappingProxyType

import numpy as np
import pytest

from beamctl.control import (RULE_CHAIN, RULE_FREE, RULE_HEAD, MomentData, control_1d, cost_sweep,
                             endpoint_from_moments, least_norm_cost, moment_targets, synthesize,
                             synthesize_profiles, verify_control, weak_control)
from beamctl.errors import DegenerateGap, TailDominant, UnresolvableCluster
from beamctl.modal import BeamState, EndpointState, free_state
from beamctl.spectrum import ClusterMap, FrequencySet, RootPair, SpectralParams, cluster_map, frequency_set

COINCIDENT = SpectralParams(1.0, 13 / 6, 4)
# rho chosen so that lambda_3^+ equals lambda_2^- exactly at alpha = 1.2
ENGINEERED = SpectralParams(1.2, 1.5437095233851856, 4)


def test_moment_example():
    fs = frequency_set(SpectralParams(0.5, 1.0, 1))
    r = fs.root(1)
    md = moment_targets(EndpointState(np.array([1.0 + 0j]), np.array([0j]), 1.0), fs)
    # gamma = (1, 0): moments are q * lambda-/(lambda- - lambda+) and q * lambda+/(lambda+ - lambda-)
    assert md.zeta[1] == pytest.approx(-r.lambda_minus)
    assert md.zeta[-1] == pytest.approx(-r.lambda_plus)
    md = moment_targets(EndpointState(np.array([1.0 + 0j]), np.array([2.0 + 0j]), 1.0),
                        frequency_set(SpectralParams(1.0, 2.0, 1)))
    assert md.zeta[-1] == pytest.approx(1) and md.zeta[1] == pytest.approx(3)


@pytest.mark.parametrize("p", [SpectralParams(0.5, 1.0, 5), SpectralParams(1.0, 2.0, 3), COINCIDENT])
def test_moments_roundtrip(p):
    fs = frequency_set(p)
    rng = np.random.default_rng(11)
    ep = EndpointState(rng.normal(size=p.n_modes) + 0j, rng.normal(size=p.n_modes) + 0j, 1.0)
    back = endpoint_from_moments(moment_targets(ep, fs), fs)
    np.testing.assert_allclose(back.gamma1, ep.gamma1, atol=1e-12)
    np.testing.assert_allclose(back.gamma2, ep.gamma2, atol=1e-12)


def test_zero_endpoint_zero_moments():
    fs = frequency_set(SpectralParams(0.5, 1.0, 3))
    md = moment_targets(EndpointState(np.zeros(3, complex), np.zeros(3, complex), 1.0), fs)
    assert all(z == 0 for z in md.zeta.values())


def test_degenerate_gap():
    roots = (RootPair(1, -1 + 0j, -1 + 0j, 0j, False),)
    fs = FrequencySet(SpectralParams(1.0, 2.0, 1), roots, MappingProxyType({-1: 1j, 1: 1j}), frozenset())
    with pytest.raises(DegenerateGap):
        moment_targets(EndpointState(np.ones(1, complex), np.zeros(1, complex), 1.0), fs)


def test_profiles_without_clusters():
    fs = frequency_set(SpectralParams(0.5, 1.0, 5))
    prof = synthesize_profiles(fs, cluster_map(fs, 0.01))
    np.testing.assert_allclose(prof.h1, 1 / np.arange(1, 6))
    assert not np.any(prof.h2)
    assert set(prof.assignment_log.values()) == {RULE_FREE}


def test_profiles_coincidence():
    fs = frequency_set(COINCIDENT)
    prof = synthesize_profiles(fs, cluster_map(fs, 1e-6))
    assert prof.h2[2] == pytest.approx(1 / 3) and prof.h1[2] == 0
    assert prof.active(1) == [1, 2, 4] and prof.active(2) == [3]
    assert prof.assignment_log[3] == RULE_HEAD


def test_profiles_chain():
    fs = frequency_set(SpectralParams(0.5, 1.0, 3))
    cm = ClusterMap(0.1, ((1, 2), (2, 3)), {1: 2, 2: 3}, frozenset({1, 2}), frozenset({2, 3}), frozenset({2}))
    prof = synthesize_profiles(fs, cm)
    assert prof.active(1) == [1, 3] and prof.active(2) == [2]
    assert prof.assignment_log == {1: RULE_HEAD, 2: RULE_CHAIN, 3: RULE_FREE}


def test_odd_closed_chain_unresolvable():
    fs = frequency_set(SpectralParams(0.5, 1.0, 3))
    ring = frozenset({1, 2, 3})
    cm = ClusterMap(0.1, ((1, 2), (2, 3), (3, 1)), {1: 2, 2: 3, 3: 1}, ring, ring, ring)
    with pytest.raises(UnresolvableCluster):
        synthesize_profiles(fs, cm)


def test_even_closed_chain_alternates():
    fs = frequency_set(SpectralParams(0.5, 1.0, 4))
    ring = frozenset({1, 2, 3, 4})
    cm = ClusterMap(0.1, ((1, 2), (2, 3), (3, 4), (4, 1)), {1: 2, 2: 3, 3: 4, 4: 1}, ring, ring, ring)
    prof = synthesize_profiles(fs, cm)
    assert prof.active(1) == [1, 3] and prof.active(2) == [2, 4]


def test_zero_state_zero_control():
    syn = synthesize(SpectralParams(0.5, 1.0, 4), BeamState(np.zeros(4), np.zeros(4)), 1.0)
    assert syn.control.norm == 0
    assert not np.any(syn.control.f1)


def test_tail_dominant():
    # data in the top mode only: truncation cannot be trusted
    with pytest.raises(TailDominant):
        synthesize(SpectralParams(0.5, 1.0, 4), BeamState.eigenmode(4, 4), 1.0)
    syn = synthesize(SpectralParams(0.5, 1.0, 4), BeamState.eigenmode(1, 4), 1.0)
    ctrl = control_1d(syn.moments, syn.control.profiles.h1, syn.families[1], syn.fs)
    assert ctrl.meta["tail_estimate"] <= 1e-6


def test_mode_doubling_changes_cost_little():
    costs = []
    for N in (32, 64):
        fs = frequency_set(SpectralParams(0.5, 1.0, N))
        md = moment_targets(free_state(BeamState.eigenmode(1, N), fs, 1.0), fs)
        costs.append(least_norm_cost(fs, md, 1 / np.arange(1, N + 1), 1.0))
    assert abs(costs[1] - costs[0]) < 0.01 * costs[1]


def test_least_norm_cost_matches_sampled():
    p = SpectralParams(0.5, 1.0, 6)
    syn = synthesize(p, BeamState.eigenmode(1, 6), 1.0)
    exact = least_norm_cost(syn.fs, syn.moments, syn.control.profiles.h1, 1.0)
    assert exact == pytest.approx(syn.control.meta["least_norm"], rel=1e-6)
    assert exact == pytest.approx(syn.control.norm, rel=1e-4)


def test_two_input_idle_when_subset_at_rest():
    # mode 3 carries no data, so the input that drives it has nothing to do
    st = BeamState([1.0, 0.5, 0.0, 0.2], [0.0, 0.0, 0.0, 0.1])
    syn = synthesize(COINCIDENT, st, 1.0, epsilon=1e-6)
    assert np.max(np.abs(syn.control.f2)) < 1e-12 * max(1.0, np.max(np.abs(syn.control.f1)))
    assert verify_control(st, syn.control, syn.fs).relative_energy <= 1e-6


@pytest.mark.slow
def test_two_input_random_data_alpha_1_2():
    p = SpectralParams(1.2, 1.0, 6)
    rng = np.random.default_rng(4)
    st = BeamState(rng.normal(size=6) / np.arange(1, 7) ** 2, rng.normal(size=6) / np.arange(1, 7) ** 2)
    syn = synthesize(p, st, 1.0)
    assert syn.control.kind.value == "Scalar2D"
    assert verify_control(st, syn.control, syn.fs).relative_energy <= 1e-5


def test_weak_large_eps_gives_zero_control():
    p = SpectralParams(1.6, 1.0, 4)
    fs = frequency_set(p)
    md = moment_targets(free_state(BeamState.eigenmode(1, 4), fs, 1.0), fs)
    ctrl = weak_control(md, synthesize_profiles(fs, cluster_map(fs)), 10.0, fs, 1.0)
    assert ctrl.norm == 0 and ctrl.meta["cutoff"] == 0


def test_interior_zero_data():
    syn = synthesize(SpectralParams(0.5, 1.0, 4), BeamState(np.zeros(4), np.zeros(4)), 1.0, interval=(1.0, 2.0))
    assert not np.any(syn.control.f_xt)


def test_interior_engineered_cluster():
    fs = frequency_set(ENGINEERED)
    assert abs(fs.root(3).lambda_plus - fs.root(2).lambda_minus) < 1e-9
    st = BeamState.eigenmode(1, 4)
    syn = synthesize(ENGINEERED, st, 1.0, epsilon=1e-6, interval=(1.0, 2.0))
    assert syn.cluster_map.pairs == ((3, 2),)
    assert syn.control.meta["cross_residual"] <= 1e-6
    assert verify_control(st, syn.control, syn.fs).relative_energy <= 1e-4


def test_cost_sweep_single_horizon():
    rep = cost_sweep(SpectralParams(0.5, 1.0, 4), BeamState.eigenmode(1, 4), [1.0])
    assert rep.best_exponent is None and rep.monotone
    assert rep.norms[0] > 0


def test_moment_data_serializes():
    md = MomentData({1: 1 + 2j}, 1.0)
    assert md.to_dict() == {"T": 1.0, "zeta": {"1": {"re": 1.0, "im": 2.0}}}
