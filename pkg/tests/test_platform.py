import pytest
from hypothesis import given
from hypothesis import strategies as st

from thermoloop.platform import (
    BIG,
    GPU,
    LITTLE,
    OPP,
    AppFrameModel,
    Cluster,
    DemandSchedule,
    Platform,
    Process,
    UnknownProcess,
    achieved_fps,
    default_clusters,
    dynamic_power,
    effective_utilization,
    linear_opp_table,
    windowed_process_power,
)
from thermoloop.simulation import bundled_scenario
from thermoloop.thermal import ThermalParams
from thermoloop.trace import TraceSample, power_shares


def make_platform(processes, app=None, **kw):
    procs = {p.pid: p for p in processes}
    return Platform(ThermalParams(), default_clusters(), procs, app=app, **kw)


def proc(pid, cluster, demand, **kw):
    return Process(pid, DemandSchedule.constant(demand), cluster, **kw)


def sample(t, powers):
    return TraceSample(t, 30.0, 0, 0, 0, 0, 0, 0, 0, 0, process_power=powers)


def shares_of(name, samples=200):
    scenario = bundled_scenario(name).with_governor("interactive")
    platform = scenario.build_platform()
    trace = [platform.step(scenario.dt)[1] for _ in range(samples)]
    return power_shares(trace)


def test_utilization_zero_demand():
    big = default_clusters()[BIG]
    assert effective_utilization(0.0, big, big.peak_throughput) == 0.0


def test_utilization_reference_point():
    big = default_clusters()[BIG]
    assert effective_utilization(0.5, big, big.peak_throughput) == 0.5


def test_utilization_saturates_on_slower_cluster():
    big = default_clusters()[BIG]
    slow = Cluster("little", list(big.opp_table), perf_scale=0.4)
    assert effective_utilization(0.5, slow, big.peak_throughput) == 1.0


@given(st.floats(0.0, 1.0))
def test_utilization_bounded(d):
    c = default_clusters()
    assert 0.0 <= effective_utilization(d, c[LITTLE], c[BIG].peak_throughput) <= 1.0


def test_dynamic_power_hand_value():
    cluster = Cluster("x", [OPP(600.0, 1.0, 1e-3)])
    assert dynamic_power(cluster, []) == 0.0
    assert dynamic_power(cluster, [1.0]) == pytest.approx(0.6)


def test_dynamic_power_linear_in_load():
    big = default_clusters()[BIG]
    assert dynamic_power(big, [0.3, 0.3]) == 2 * dynamic_power(big, [0.3])


def test_linear_opp_table_voltages():
    table = linear_opp_table((100, 200, 300), 1e-4, 0.9, 1.1)
    assert [o.voltage for o in table] == pytest.approx([0.9, 1.0, 1.1])


def test_cluster_validation():
    with pytest.raises(ValueError):
        Cluster("x", [])
    with pytest.raises(ValueError):
        Cluster("x", [OPP(200, 1.0, 1e-4), OPP(100, 1.0, 1e-4)])
    with pytest.raises(ValueError):
        Cluster("x", [OPP(100, 1.0, 1e-4)], current_opp=3)


def test_demand_schedule_periodic():
    d = DemandSchedule([(0.0, 1.0), (0.2, 0.0)], repeat=0.5)
    assert [d(t) for t in (0.0, 0.1, 0.2, 0.45, 0.5, 0.7)] == [1.0, 1.0, 0.0, 0.0, 1.0, 0.0]
    with pytest.raises(ValueError):
        DemandSchedule([(0.0, 1.5)])
    with pytest.raises(ValueError):
        DemandSchedule([(0.2, 0.1), (0.1, 0.1)])


def test_idle_platform_stays_at_ambient():
    platform = make_platform([proc(1, BIG, 0.0), proc(2, GPU, 0.0)])
    for _ in range(500):
        platform.step(0.01)
    # only ambient-level leakage heats the node; its fixed point is ~0.26 K up
    assert 300.0 < platform.T < 300.3
    platform = Platform(ThermalParams(P_g=0), default_clusters(), {1: proc(1, BIG, 0.0)})
    for _ in range(500):
        platform.step(0.01)
    assert platform.T == 300.0


def test_step_sample_records_pre_step_state():
    platform = make_platform([proc(1, BIG, 0.5)])
    breakdown, s = platform.step(0.01, "none")
    assert s.t == 0.0 and s.T_c == pytest.approx(26.85)
    assert s.p_big == pytest.approx(breakdown.dynamic_per_component[BIG])
    assert s.p_total == pytest.approx(breakdown.total)
    assert s.decision == "none" and s.fps is None
    assert platform.t == 0.01


def test_app_alone_big_share_and_gpu_largest():
    shares = shares_of("3dmark_alone")
    assert shares[BIG] == pytest.approx(38.0, abs=3.0)
    assert shares[GPU] == max(shares.values())


def test_background_task_big_share():
    assert shares_of("3dmark_bml")[BIG] == pytest.approx(60.0, abs=3.0)


def test_app_alone_fps_calibration():
    platform = bundled_scenario("3dmark_alone").build_platform()
    assert platform.fps() == pytest.approx(97.0, abs=0.5)


def test_migration_lowers_big_power_vs_counterfactual():
    def run(migrate):
        platform = make_platform([proc(1, BIG, 0.4), proc(2, BIG, 0.9)], seed=3)
        if migrate:
            platform.migrate(2, LITTLE)
        return platform.step(0.01)[0].dynamic_per_component

    moved, stayed = run(True), run(False)
    assert moved[BIG] < stayed[BIG]
    assert moved[LITTLE] > stayed[LITTLE]


def test_migrate_to_current_cluster_is_noop():
    platform = make_platform([proc(1, BIG, 0.4)])
    platform.migrate(1, BIG)
    assert platform.migrations == [] and platform.processes[1].assigned_cluster == BIG


def test_migrate_errors():
    platform = make_platform([proc(1, BIG, 0.4)])
    with pytest.raises(UnknownProcess):
        platform.migrate(9, LITTLE)
    with pytest.raises(ValueError):
        platform.migrate(1, "npu")


def test_little_share_rises_after_migration():
    scenario = bundled_scenario("3dmark_bml").with_governor("interactive")
    platform = scenario.build_platform()
    before = power_shares([platform.step(0.01)[1] for _ in range(100)])
    platform.migrate(200, LITTLE)
    after = power_shares([platform.step(0.01)[1] for _ in range(100)])
    assert after[LITTLE] > before[LITTLE] + 5


def test_windowed_power_constant():
    history = [sample(0.1 * k, {7: 0.5}) for k in range(1, 11)]
    assert windowed_process_power(history, 7) == pytest.approx(0.5)


def test_windowed_power_filters_spike():
    history = [sample(0.1 * k, {7: 5.0 if k == 4 else 0.5}) for k in range(1, 11)]
    assert windowed_process_power(history, 7) == pytest.approx(0.95)


def test_windowed_power_uses_trailing_window_only():
    history = [sample(0.1 * k, {7: 9.0 if k <= 10 else 0.0}) for k in range(1, 21)]
    assert windowed_process_power(history, 7) == 0.0


def test_windowed_power_unknown_pid():
    with pytest.raises(UnknownProcess):
        windowed_process_power([sample(0.1, {1: 0.2})], 2)
    with pytest.raises(UnknownProcess):
        windowed_process_power([], 1)


def test_fps_capped_at_target():
    app = AppFrameModel(1, work_per_frame=1.0, target_fps=60)
    assert achieved_fps(app, default_clusters()[GPU], 1.0) == 60.0


def test_fps_proportional_to_frequency():
    app = AppFrameModel(1, work_per_frame=10.0, target_fps=1000)
    gpu = Cluster("gpu", [OPP(300.0, 1.0, 1e-3), OPP(600.0, 1.0, 1e-3)])
    full = achieved_fps(app, gpu, 1.0)
    gpu.current_opp = 0
    assert achieved_fps(app, gpu, 1.0) == full / 2


def test_throttle_depth_caps_opps():
    platform = make_platform([proc(1, BIG, 0.4)])
    platform.set_throttle_depth(2)
    assert platform.clusters[BIG].current_opp == platform.clusters[BIG].top - 2
    assert platform.clusters[GPU].freq == 450.0
    platform.set_throttle_depth(99)
    assert all(c.current_opp == 0 for c in platform.clusters.values())
    assert platform.throttle_depth == platform.max_throttle_depth


def test_register_realtime_idempotent():
    platform = make_platform([proc(1, BIG, 0.4)])
    platform.register_realtime(1)
    platform.register_realtime(1)
    assert platform.processes[1].realtime_exempt
    with pytest.raises(UnknownProcess):
        platform.register_realtime(2)


def test_jitter_is_seeded():
    def demands(seed):
        platform = make_platform([proc(1, BIG, 0.5, jitter=0.2)], seed=seed)
        out = []
        for _ in range(20):
            platform.step(0.01)
            out.append(platform.demands[1])
        return out

    assert demands(4) == demands(4)
    assert demands(4) != demands(5)
    assert all(0.4 <= d <= 0.6 for d in demands(4))


def test_runaway_flag():
    platform = make_platform([proc(1, BIG, 1.0), proc(2, GPU, 1.0)], T=480.0)
    for _ in range(10_000):
        platform.step(0.1)
        if platform.runaway:
            break
    assert platform.runaway and platform.T > 500.0


def test_platform_validation():
    with pytest.raises(ValueError):
        Platform(ThermalParams(), default_clusters(), {1: proc(2, BIG, 0.1)})
    with pytest.raises(ValueError):
        make_platform([proc(1, "npu", 0.1)])
    with pytest.raises(ValueError):
        make_platform([proc(1, BIG, 0.1)], app=AppFrameModel(5, 1.0, 60))
