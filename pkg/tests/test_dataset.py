import numpy as np
import pytest

from pfsurrogate.acpf import PFState, SolverOptions, mismatch, solve_nr
from pfsurrogate.dataset import (
    DimensionMismatch, EmptySet, SampleSet, TooManyRejections, denormalize, fit_scaler,
    generate_samples, load_samples, network_from_input, normalize, save_samples, split,
)
from pfsurrogate.netmodel import build_ybus, net_injections

from conftest import two_bus


@pytest.fixture(scope="module")
def small_set(nets, case_text):
    return generate_samples(nets["case9"], 40, 0.1, seed=11, system_tag="case9",
                            case_text=case_text["case9"])


def _fake(n):
    x = np.arange(n * 3, dtype=float).reshape(n, 3)
    return SampleSet(x, x[:, :2] * 2, "t", 0, "", 1)


def test_zero_perturbation_reproduces_base_case(nets):
    net = nets["case9"]
    base = solve_nr(net)
    samples = generate_samples(net, 3, 0.0, seed=5)
    p, q = net_injections(net)
    for x, y in zip(samples.inputs, samples.outputs):
        assert np.array_equal(x, np.concatenate([net.voltage_setpoints(), p, q]))
        assert np.allclose(y[:9], base.state.vm, atol=1e-10)
        assert np.allclose(y[9:], base.branch_p_from, atol=1e-6)


def test_bit_identical_for_same_seed(nets):
    a = generate_samples(nets["case24"], 15, 0.1, seed=3)
    b = generate_samples(nets["case24"], 15, 0.1, seed=3)
    assert np.array_equal(a.inputs, b.inputs) and np.array_equal(a.outputs, b.outputs)
    c = generate_samples(nets["case24"], 15, 0.1, seed=4)
    assert not np.array_equal(a.inputs, c.inputs)


def test_independent_of_worker_count(nets):
    a = generate_samples(nets["case9"], 12, 0.1, seed=2, workers=1)
    b = generate_samples(nets["case9"], 12, 0.1, seed=2, workers=3)
    assert np.array_equal(a.inputs, b.inputs) and np.array_equal(a.outputs, b.outputs)


def test_prefix_stable_across_counts(nets):
    a = generate_samples(nets["case9"], 5, 0.1, seed=8)
    b = generate_samples(nets["case9"], 9, 0.1, seed=8)
    assert np.array_equal(a.inputs, b.inputs[:5])


def test_dimensions(nets):
    s = generate_samples(nets["case24"], 4, 0.1, seed=1)
    assert s.inputs.shape == (4, 72)
    assert s.outputs.shape == (4, 24 + nets["case24"].n_branch)


def test_perturbation_bounds(nets, small_set):
    net = nets["case9"]
    n = net.n_bus
    p0, q0 = net_injections(net)
    v0 = net.voltage_setpoints()
    pq = net.pq()
    x = small_set.inputs
    assert np.all(x[:, pq] == 1.0)
    reg = np.setdiff1d(np.arange(n), pq)
    ratio = x[:, reg] / v0[reg]
    assert ratio.min() >= 0.9 - 1e-12 and ratio.max() <= 1.1 + 1e-12
    loads = np.flatnonzero(q0 != 0)
    qr = x[:, 2 * n + loads] / q0[loads]
    assert qr.min() >= 0.9 - 1e-12 and qr.max() <= 1.1 + 1e-12
    assert qr.std() > 0.01


def test_generation_tracks_total_demand(nets, small_set):
    net = nets["case9"]
    n = net.n_bus
    gen_buses = sorted({net.index_of(g.bus) for g in net.gens})
    pd0 = sum(b.p_demand for b in net.buses)
    pg0 = {i: sum(g.p_gen for g in net.gens if net.index_of(g.bus) == i) for i in gen_buses}
    for x in small_set.inputs:
        demand = -(x[n:2 * n][[i for i in range(n) if i not in gen_buses]]).sum() * net.base_mva
        scale = demand / pd0
        for i in gen_buses:
            if pg0[i]:
                assert x[n + i] * net.base_mva == pytest.approx(pg0[i] * scale, rel=1e-12)


def test_labels_satisfy_power_flow(nets, small_set):
    net = nets["case9"]
    n = net.n_bus
    for x, y in zip(small_set.inputs, small_set.outputs):
        rebuilt = network_from_input(net, x)
        sol = solve_nr(rebuilt, SolverOptions(tol=1e-10))
        assert np.allclose(sol.state.vm, y[:n], atol=1e-7)
        assert np.allclose(sol.branch_p_from, y[n:], atol=1e-5)
        p, q = net_injections(rebuilt)
        # residual of the stored magnitudes with the re-solved angles
        r = mismatch(PFState(y[:n], sol.state.va), build_ybus(rebuilt), p, q, rebuilt.kinds())
        assert np.abs(r).max() < 1e-7


def test_demand_only_mode(nets):
    net = nets["case9"]
    s = generate_samples(net, 5, 0.1, seed=1, perturb_voltage=False)
    assert np.all(s.inputs[:, :9] == net.voltage_setpoints())


def test_too_many_rejections():
    # 8 pu across x = 0.1 exceeds the line's transfer limit for every draw
    with pytest.raises(TooManyRejections):
        generate_samples(two_bus(p_load=800.0), 1, 0.05, seed=0)


def test_bad_arguments(nets):
    with pytest.raises(ValueError):
        generate_samples(nets["case9"], 0, 0.1)
    with pytest.raises(ValueError):
        generate_samples(nets["case9"], 1, 1.0)


def test_split_sizes():
    for n, sizes in [(10, (8, 1, 1)), (10000, (8000, 1000, 1000)), (7, (7, 0, 0)), (13, (11, 1, 1))]:
        parts = split(_fake(n), (0.8, 0.1, 0.1), seed=0)
        assert (len(parts.train), len(parts.val), len(parts.test)) == sizes


def test_split_disjoint_cover_and_deterministic():
    s = _fake(50)
    a = split(s, seed=9)
    b = split(s, seed=9)
    ids = np.concatenate([a.train.inputs[:, 0], a.val.inputs[:, 0], a.test.inputs[:, 0]])
    assert sorted(ids) == sorted(s.inputs[:, 0])
    assert np.array_equal(a.test.inputs, b.test.inputs)
    assert not np.array_equal(split(s, seed=10).test.inputs, a.test.inputs)


def test_split_errors():
    with pytest.raises(EmptySet):
        split(SampleSet(np.zeros((0, 3)), np.zeros((0, 2)), "t", 0, "", 1))
    with pytest.raises(ValueError):
        split(_fake(10), (0.8, 0.1, 0.2))


def test_scaler_examples():
    sc = fit_scaler(np.array([[2.0], [4.0], [6.0]]))
    assert sc.feature_min[0] == 2 and sc.feature_max[0] == 6
    assert np.allclose(normalize(sc, np.array([[2.0], [4.0], [6.0]])).ravel(), [0, 0.5, 1])
    const = fit_scaler(np.array([[5.0], [5.0], [5.0]]))
    assert const.feature_min[0] == const.feature_max[0] == 5
    assert normalize(const, [5.0])[0] == 0
    assert denormalize(const, [0.37])[0] == 5
    single = fit_scaler(np.array([[1.0, -2.0]]))
    assert np.array_equal(single.feature_min, single.feature_max)


def test_scaler_round_trip_and_extrapolation():
    rng = np.random.default_rng(0)
    data = rng.normal(size=(30, 6))
    sc = fit_scaler(data)
    assert np.abs(denormalize(sc, normalize(sc, data)) - data).max() < 1e-12
    out = normalize(sc, data.max(axis=0) + 1.0)
    assert np.all(out > 1.0)


def test_scaler_on_sample_set_uses_given_split(small_set):
    parts = split(small_set, seed=0)
    sc = fit_scaler(parts.train, "inputs")
    z = sc.normalize(parts.train.inputs)
    assert z.min() >= 0.0 and z.max() <= 1.0
    with pytest.raises(DimensionMismatch):
        sc.normalize(np.zeros(5))
    with pytest.raises(EmptySet):
        fit_scaler(small_set.subset(slice(0, 0)))


def test_save_load_round_trip(tmp_path, small_set):
    path = tmp_path / "d.pfds.json"
    save_samples(small_set, path)
    loaded = load_samples(path)
    assert np.array_equal(loaded.inputs, small_set.inputs)
    assert np.array_equal(loaded.outputs, small_set.outputs)
    assert loaded.system_tag == "case9" and loaded.seed == 11
    assert loaded.base_case_hash == small_set.base_case_hash != ""
    save_samples(loaded, tmp_path / "again.pfds.json")
    assert path.read_bytes() == (tmp_path / "again.pfds.json").read_bytes()
