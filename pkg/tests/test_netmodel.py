import numpy as np
import pytest

from pfsurrogate.netmodel import (
    Branch, Bus, BusKind, DanglingBus, Generator, Network, NetworkError, ZeroImpedanceBranch,
    build_ybus, net_injections,
)

from conftest import two_bus


def test_single_branch_susceptance():
    y = build_ybus(two_bus(r=0.0, x=0.1))
    assert y.b[0, 1] == pytest.approx(10.0)
    assert y.b[0, 0] == pytest.approx(-10.0)
    assert np.all(y.g == 0)


def test_line_charging_splits_between_ends():
    y = build_ybus(two_bus(x=0.1, b_charge=0.02))
    assert y.b[0, 0] == pytest.approx(-9.99)
    assert y.b[1, 1] == pytest.approx(-9.99)


def test_rows_sum_to_zero_without_shunts_or_taps(nets):
    net = nets["case9"]  # no taps, no shunts, but line charging
    plain = Network(net.base_mva, net.buses,
                    [Branch(b.from_bus, b.to_bus, b.r, b.x) for b in net.branches], net.gens)
    y = build_ybus(plain).complex
    assert np.abs(y.sum(axis=1)).max() < 1e-12


def test_tap_and_shift_entries():
    br = Branch(1, 2, r=0.01, x=0.1, b_charge=0.04, tap=0.95, shift=5.0)
    net = Network(100.0, [Bus(1, BusKind.SLACK), Bus(2, BusKind.PQ)], [br], [Generator(1)])
    y = build_ybus(net).complex
    ys = 1 / complex(0.01, 0.1)
    t = 0.95 * np.exp(1j * np.deg2rad(5.0))
    assert y[0, 0] == pytest.approx((ys + 0.02j) / 0.95**2)
    assert y[1, 1] == pytest.approx(ys + 0.02j)
    assert y[0, 1] == pytest.approx(-ys / np.conj(t))
    assert y[1, 0] == pytest.approx(-ys / t)
    assert not np.allclose(y, y.T)


def test_bus_shunt_scaled_by_base():
    net = Network(100.0, [Bus(1, BusKind.SLACK, shunt_g=5.0, shunt_b=19.0), Bus(2, BusKind.PQ)],
                  [Branch(1, 2, 0.0, 0.1)], [Generator(1)])
    y = build_ybus(net)
    assert y.g[0, 0] == pytest.approx(0.05)
    assert y.b[0, 0] == pytest.approx(-10 + 0.19)


def test_symmetric_without_shifters(nets):
    for net in nets.values():
        y = build_ybus(net)
        assert np.allclose(y.g, y.g.T, atol=0) and np.allclose(y.b, y.b.T, atol=0)
        assert y.n == net.n_bus


def test_permutation_equivariance(nets):
    net = nets["case24"]
    rng = np.random.default_rng(3)
    perm = rng.permutation(net.n_bus)
    shuffled = Network(net.base_mva, [net.buses[i] for i in perm], net.branches, net.gens)
    y0 = build_ybus(net).complex
    y1 = build_ybus(shuffled).complex
    assert np.allclose(y1, y0[np.ix_(perm, perm)], rtol=0, atol=1e-12)


def test_disabled_branch_equals_removed(nets):
    net = nets["case9"]
    off = list(net.branches)
    off[3] = Branch(**{**off[3].__dict__, "status": False})
    removed = [b for k, b in enumerate(net.branches) if k != 3]
    y_off = build_ybus(Network(net.base_mva, net.buses, off, net.gens))
    y_rm = build_ybus(Network(net.base_mva, net.buses, removed, net.gens))
    assert np.array_equal(y_off.g, y_rm.g) and np.array_equal(y_off.b, y_rm.b)


def test_zero_impedance_rejected():
    with pytest.raises(ZeroImpedanceBranch):
        build_ybus(two_bus(r=0.0, x=0.0))


def test_dangling_references():
    with pytest.raises(DanglingBus):
        Network(100.0, [Bus(1, BusKind.SLACK)], [Branch(1, 7, 0.0, 0.1)])
    with pytest.raises(DanglingBus):
        Network(100.0, [Bus(1, BusKind.SLACK)], [], [Generator(4)])


def test_structural_invariants():
    with pytest.raises(NetworkError):
        Network(0.0, [Bus(1, BusKind.SLACK)])
    with pytest.raises(NetworkError):
        Network(100.0, [Bus(1, BusKind.SLACK), Bus(1, BusKind.PQ)])
    with pytest.raises(NetworkError):
        Network(100.0, [Bus(1, BusKind.SLACK), Bus(2, BusKind.PQ)], [Branch(2, 2, 0, 0.1)])
    with pytest.raises(NetworkError):
        Network(100.0, [Bus(1, BusKind.PQ)]).slack


def test_injections():
    net = Network(
        100.0,
        [Bus(1, BusKind.SLACK), Bus(2, BusKind.PV, p_demand=100.0), Bus(3, BusKind.PQ, q_demand=30.0)],
        [Branch(1, 2, 0, 0.1), Branch(2, 3, 0, 0.1)],
        [Generator(1), Generator(2, p_gen=50.0)],
    )
    p, q = net_injections(net)
    assert p[1] == pytest.approx(-0.5)
    assert p[2] == 0 and q[1] == 0
    assert q[2] == pytest.approx(-0.3)
