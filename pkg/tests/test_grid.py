import numpy as np
import pytest

from dreminertia import ENTSOE_PARAMS, AggregatedScenario, StepChange, simulate_aggregated
from dreminertia.grid import (GridSimulator, LoadStep, MachineParams, Outage, RescheduleRamp,
                              ScenarioSpec, aggregate_params, compute_avg_freq, compute_coi,
                              compute_h_tot, compute_p_e_pfc, compute_p_m_pfc, compute_p_pfc_tot,
                              default_fleet, homogeneous_fleet, schedule_trace, simulate_scenario)
from dreminertia.model import FrequencyCollapseError


def m(h=4.0, s=100.0, p=0.5, k=0.0, **kw):
    return MachineParams(h_i=h, s_bi=s, p_mi=p, k_i=k, is_pfc=k > 0, **kw)


def test_machine_invariants():
    with pytest.raises(ValueError):
        MachineParams(h_i=0.0, s_bi=1.0, p_mi=0.5)
    with pytest.raises(ValueError):
        MachineParams(h_i=1.0, s_bi=-1.0, p_mi=0.5)
    with pytest.raises(ValueError):
        MachineParams(h_i=1.0, s_bi=1.0, p_mi=0.5, k_i=1.0, is_pfc=False)
    with pytest.raises(ValueError):
        MachineParams(h_i=1.0, s_bi=1.0, p_mi=0.5, k_i=1.0, is_pfc=True, t_pi=5.0, t_zi=6.0)


def test_coi_examples():
    assert compute_coi([1.01, 0.99], [m(), m()]) == pytest.approx(1.0)
    assert compute_coi([0.97] * 3, [m(2, 10), m(5, 300), m(3, 7)]) == pytest.approx(0.97)
    # H*S weights (2, 1)
    assert compute_coi([1.0, 0.7], [m(2.0, 1.0), m(1.0, 1.0)]) == pytest.approx(0.9)
    with pytest.raises(ValueError):
        compute_coi([], [])
    with pytest.raises(ValueError):
        compute_coi([1.0], [m(), m()])


def test_h_tot_examples():
    assert compute_h_tot([m(3.3)]) == 3.3
    assert compute_h_tot([m(4.0, 100.0), m(2.0, 300.0)]) == pytest.approx(2.5)
    fleet = [m(2.5, 100.0), m(4.0, 300.0), m(2.5, 200.0)]
    h = compute_h_tot(fleet)
    fleet2 = [m(h, 50.0)] + fleet
    assert compute_h_tot(fleet2) == pytest.approx(h, rel=1e-15)
    with pytest.raises(ValueError):
        compute_h_tot([])


def test_power_aggregates_on_system_base():
    fleet = [m(4.0, 100.0, 0.5, k=2.0), m(3.0, 300.0, 0.6)]
    assert compute_p_m_pfc(fleet) == pytest.approx(0.5 * 100 / 400)
    assert compute_p_e_pfc([0.4, 0.9], fleet) == pytest.approx(0.1)
    assert compute_p_pfc_tot([0.02, 0.3], fleet) == pytest.approx(0.005)
    assert compute_avg_freq([0.99, 1.01, 1.0]) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        compute_p_m_pfc([m()])
    with pytest.raises(ValueError):
        compute_avg_freq([])


def test_spec_validation():
    with pytest.raises(ValueError):
        ScenarioSpec(10.0, events=[LoadStep(10.0, 0.1)])
    with pytest.raises(ValueError):
        ScenarioSpec(10.0, dt=0.0)
    with pytest.raises(ValueError):
        ScenarioSpec(10.0, events=[RescheduleRamp(1.0, 0, 0.1, -1.0)])
    spec = ScenarioSpec(10.0, events=[LoadStep(5.0, 0.1), Outage(2.0, 1)])
    assert [e.time for e in spec.events] == [2.0, 5.0]


def test_default_fleet_aggregates():
    fleet = default_fleet(0)
    assert len(fleet) == 10
    assert sum(f.is_pfc for f in fleet) == 8
    assert all(2.5 <= f.h_i <= 6.0 for f in fleet)
    agg = aggregate_params(fleet)
    assert agg.h_tot == pytest.approx(3.665, rel=1e-12)
    assert agg.k_p == pytest.approx(2.495, rel=1e-12)
    assert agg.p_m_pfc == pytest.approx(0.498, rel=1e-12)
    gen = sum(f.s_bi * f.p_mi for f in fleet)
    assert fleet[7].is_pfc
    assert fleet[7].s_bi * fleet[7].p_mi / gen == pytest.approx(0.02, rel=1e-9)


def test_default_fleet_seeded():
    assert default_fleet(3) == default_fleet(3)
    assert default_fleet(3) != default_fleet(4)


def test_equilibrium_run_is_flat():
    series, truth = simulate_scenario(default_fleet(0), ScenarioSpec(5.0))
    assert np.max(np.abs(series.omega_av - 1.0)) < 1e-12
    assert np.max(np.abs(series.p_pfc_tot)) < 1e-12
    assert np.allclose(series.p_e_pfc, 0.498, rtol=0, atol=1e-12)
    assert np.all(truth.h_tot == truth.h_tot[0])


def test_outage_bookkeeping_is_exact(fleet):
    series, truth, coupling = simulate_scenario(fleet, ScenarioSpec(15.0, events=[Outage(10.0, 7)]),
                                                record_coupling=True)
    survivors = [f for i, f in enumerate(fleet) if i != 7]
    k = 10000
    assert truth.h_tot[k - 1] == compute_h_tot(fleet)
    assert truth.h_tot[k] == compute_h_tot(survivors)
    assert truth.p_m_pfc[k] == compute_p_m_pfc(survivors)
    # ground truth steps by the tripped unit's weighted share
    s_all = sum(f.s_bi for f in fleet)
    h_step = (compute_h_tot(fleet) * s_all - fleet[7].h_i * fleet[7].s_bi) / (s_all - fleet[7].s_bi)
    assert truth.h_tot[-1] == pytest.approx(h_step, rel=1e-14)
    # frequency dips and starts to recover
    nadir = series.omega_av.argmin()
    assert series.omega_av[nadir] < 1.0
    assert series.t[nadir] > 10.0


def test_coupling_power_cancels(fleet):
    spec = ScenarioSpec(20.0, events=[RescheduleRamp(2.0, 3, 0.004, 3.0), LoadStep(6.0, 0.002),
                                      Outage(9.0, 7)])
    _, _, coupling = simulate_scenario(fleet, spec, record_coupling=True)
    s_b = sum(f.s_bi for f in fleet)
    assert np.max(np.abs(coupling)) / s_b <= 1e-10


def test_load_step_shared_by_rating():
    fleet = default_fleet(1)
    sim = GridSimulator(fleet)
    before = sim.p_share.copy()
    sim.apply(LoadStep(1.0, 0.01), 1.0)
    assert np.allclose(sim.p_share - before, 0.01)


def test_outage_errors(fleet):
    sim = GridSimulator(fleet)
    sim.apply(Outage(1.0, 7), 1.0)
    with pytest.raises(IndexError):
        sim.apply(Outage(2.0, 7), 2.0)
    with pytest.raises(IndexError):
        simulate_scenario(fleet, ScenarioSpec(5.0, events=[Outage(1.0, 42)]))
    solo = [m(4.0, 100.0, 0.5, k=2.0), m(3.0, 100.0, 0.5)]
    with pytest.raises(ValueError):
        GridSimulator(solo).apply(Outage(1.0, 0), 1.0)


def test_frequency_collapse_detected():
    fleet = [m(1.0, 100.0, 0.5, k=0.1, t_pi=10.0, t_zi=1.0)]
    with pytest.raises(FrequencyCollapseError):
        simulate_scenario(fleet, ScenarioSpec(30.0, events=[LoadStep(1.0, 5.0)]))


def test_rk4_and_adaptive_integration_agree(fleet):
    spec = ScenarioSpec(25.0, events=[RescheduleRamp(3.0, 2, 0.005, 3.3), LoadStep(8.0, -0.003),
                                      Outage(15.0, 7)])
    a, ta = simulate_scenario(fleet, spec)
    b, tb = simulate_scenario(fleet, spec, method="rk4")
    assert np.max(np.abs(a.omega_av - b.omega_av)) < 1e-10
    assert np.max(np.abs(a.p_pfc_tot - b.p_pfc_tot)) < 1e-10
    assert np.max(np.abs(a.p_e_pfc - b.p_e_pfc)) < 1e-10
    assert np.array_equal(ta.h_tot, tb.h_tot)


def test_homogeneous_fleet_matches_aggregated_model():
    fleet = homogeneous_fleet()
    series, _ = simulate_scenario(fleet, ScenarioSpec(40.0, events=[LoadStep(5.0, 0.01)]))
    agg, _ = simulate_aggregated(ENTSOE_PARAMS, AggregatedScenario(40.0, load_steps=[StepChange(5.0, 0.01)]))
    dev_mhz = 1e3 * 50.0 * np.max(np.abs(series.omega_av - agg.omega_av))
    assert dev_mhz <= 1.0
    assert np.max(np.abs(series.p_pfc_tot - agg.p_pfc_tot)) < 1e-9


def test_schedule_trace_matches_measured_injection():
    # without droop the measured PFC injection is exactly the schedule
    fleet = [m(4.0, 100.0, 0.5, k=1e-12, t_pi=10.0, t_zi=1.0), m(3.0, 300.0, 0.5, k=1e-12,
                                                                 t_pi=10.0, t_zi=1.0)]
    spec = ScenarioSpec(20.0, events=[RescheduleRamp(2.0, 0, 0.01, 4.0),
                                      RescheduleRamp(9.0, 1, -0.004, 0.0)])
    series, _ = simulate_scenario(fleet, spec)
    sched = schedule_trace(fleet, spec)
    assert np.max(np.abs(series.p_pfc_tot - sched)) < 1e-10
    assert sched[-1] == pytest.approx(0.006)


def test_noise_determinism(fleet):
    spec = ScenarioSpec(3.0, events=[LoadStep(1.0, 0.001)], noise=(1e-5, 1e-4, 1e-4))
    a, _ = simulate_scenario(fleet, spec, seed=9)
    b, _ = simulate_scenario(fleet, spec, seed=9)
    c, _ = simulate_scenario(fleet, spec, seed=10)
    assert np.array_equal(a.omega_av, b.omega_av) and np.array_equal(a.p_e_pfc, b.p_e_pfc)
    assert not np.array_equal(a.omega_av, c.omega_av)
