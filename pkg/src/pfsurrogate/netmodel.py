"""Per-unit network model and nodal admittance matrix."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class NetworkError(ValueError):
    """Raised when a network violates its structural invariants."""


class ZeroImpedanceBranch(NetworkError):
    pass


class DanglingBus(NetworkError):
    pass


class BusKind(enum.IntEnum):
    PQ = 1
    PV = 2
    SLACK = 3


@dataclass(frozen=True)
class Bus:
    id: int
    kind: BusKind
    p_demand: float = 0.0
    q_demand: float = 0.0
    shunt_g: float = 0.0
    shunt_b: float = 0.0
    v_init: float = 1.0
    a_init: float = 0.0
    v_min: float = 0.9
    v_max: float = 1.1


@dataclass(frozen=True)
class Branch:
    from_bus: int
    to_bus: int
    r: float
    x: float
    b_charge: float = 0.0
    tap: float = 1.0
    shift: float = 0.0
    status: bool = True
    rate_a: float = 0.0


@dataclass(frozen=True)
class Generator:
    bus: int
    p_gen: float = 0.0
    q_gen: float = 0.0
    v_set: float = 1.0
    q_min: float = -9999.0
    q_max: float = 9999.0
    p_min: float = 0.0
    p_max: float = 9999.0
    status: bool = True


@dataclass(frozen=True)
class Network:
    """Immutable bus/branch/generator model.

    Construction checks references and per-element bounds; the slack count
    is checked by :func:`caseparse.validate` and on first use of ``slack``.

    Bus ids are external labels; every array produced from a network is
    indexed by the bus position in ``buses`` (see :meth:`index_of`).
    """

    base_mva: float
    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...] = ()
    gens: tuple[Generator, ...] = ()
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "buses", tuple(self.buses))
        object.__setattr__(self, "branches", tuple(self.branches))
        object.__setattr__(self, "gens", tuple(self.gens))
        if not self.base_mva > 0:
            raise NetworkError(f"base_mva must be positive, got {self.base_mva}")
        index = {}
        for pos, bus in enumerate(self.buses):
            if bus.id in index:
                raise NetworkError(f"duplicate bus id {bus.id}")
            if not bus.v_init > 0:
                raise NetworkError(f"bus {bus.id}: v_init must be positive")
            if bus.v_min > bus.v_max:
                raise NetworkError(f"bus {bus.id}: v_min > v_max")
            index[bus.id] = pos
        object.__setattr__(self, "_index", index)
        for k, br in enumerate(self.branches):
            for end in (br.from_bus, br.to_bus):
                if end not in index:
                    raise DanglingBus(f"branch {k} references unknown bus {end}")
            if br.from_bus == br.to_bus:
                raise NetworkError(f"branch {k} connects bus {br.from_bus} to itself")
            if not br.tap > 0:
                raise NetworkError(f"branch {k}: tap must be positive")
        for g in self.gens:
            if g.bus not in index:
                raise DanglingBus(f"generator references unknown bus {g.bus}")
            if g.q_min > g.q_max or g.p_min > g.p_max:
                raise NetworkError(f"generator at bus {g.bus}: inverted limits")

    @property
    def n_bus(self) -> int:
        return len(self.buses)

    @property
    def n_branch(self) -> int:
        return len(self.branches)

    def index_of(self, bus_id: int) -> int:
        return self._index[bus_id]

    @property
    def bus_ids(self) -> list[int]:
        return [b.id for b in self.buses]

    @property
    def slack(self) -> int:
        found = [i for i, b in enumerate(self.buses) if b.kind == BusKind.SLACK]
        if len(found) != 1:
            raise NetworkError(f"expected exactly one slack bus, found {len(found)}")
        return found[0]

    def kinds(self) -> np.ndarray:
        return np.array([int(b.kind) for b in self.buses])

    def pv(self) -> np.ndarray:
        return np.flatnonzero(self.kinds() == BusKind.PV)

    def pq(self) -> np.ndarray:
        return np.flatnonzero(self.kinds() == BusKind.PQ)

    def voltage_setpoints(self) -> np.ndarray:
        """Flat-start magnitudes: 1.0 on PQ buses, first in-service generator setpoint elsewhere."""
        vm = np.ones(self.n_bus)
        seen = set()
        for g in self.gens:
            i = self._index[g.bus]
            if g.status and i not in seen and self.buses[i].kind != BusKind.PQ:
                vm[i] = g.v_set
                seen.add(i)
        return vm


@dataclass(frozen=True)
class AdmittanceMatrix:
    g: np.ndarray
    b: np.ndarray

    @property
    def n(self) -> int:
        return self.g.shape[0]

    @property
    def complex(self) -> np.ndarray:
        return self.g + 1j * self.b


def branch_admittances(br: Branch):
    """Two-port entries (yff, yft, ytf, ytt) of one branch in per unit."""
    if br.r == 0 and br.x == 0:
        raise ZeroImpedanceBranch(f"branch {br.from_bus}-{br.to_bus} has zero impedance")
    ys = 1.0 / complex(br.r, br.x)
    bc = 0.5j * br.b_charge
    t = br.tap * np.exp(1j * np.deg2rad(br.shift))
    ytt = ys + bc
    yff = ytt / (br.tap * br.tap)
    yft = -ys / np.conj(t)
    ytf = -ys / t
    return yff, yft, ytf, ytt


def build_ybus(net: Network) -> AdmittanceMatrix:
    n = net.n_bus
    y = np.zeros((n, n), dtype=complex)
    for br in net.branches:
        if not br.status:
            continue
        f, t = net.index_of(br.from_bus), net.index_of(br.to_bus)
        yff, yft, ytf, ytt = branch_admittances(br)
        y[f, f] += yff
        y[f, t] += yft
        y[t, f] += ytf
        y[t, t] += ytt
    for i, bus in enumerate(net.buses):
        y[i, i] += complex(bus.shunt_g, bus.shunt_b) / net.base_mva
    return AdmittanceMatrix(g=y.real.copy(), b=y.imag.copy())


def net_injections(net: Network) -> tuple[np.ndarray, np.ndarray]:
    """Scheduled active injection and load-only reactive injection, per unit."""
    p = np.zeros(net.n_bus)
    q_load = np.zeros(net.n_bus)
    for g in net.gens:
        if g.status:
            p[net.index_of(g.bus)] += g.p_gen
    for i, bus in enumerate(net.buses):
        p[i] -= bus.p_demand
        q_load[i] = -bus.q_demand
    return p / net.base_mva, q_load / net.base_mva
