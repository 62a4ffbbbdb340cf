"""AC power flow: Newton-Raphson solver and a Gauss-Seidel cross-check.

Reactive generator limits are not enforced; PV buses hold their setpoint
whatever reactive output that requires.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import SingularMatrix, lu_solve
from .netmodel import AdmittanceMatrix, BusKind, Network, branch_admittances, build_ybus, net_injections

FORMAT_VERSION = 1


class NonConvergence(RuntimeError):
    def __init__(self, iterations, residual):
        self.iterations = iterations
        self.residual = residual
        super().__init__(f"no convergence after {iterations} iterations (residual {residual:.3e} pu)")


class SingularJacobian(ArithmeticError):
    pass


@dataclass(frozen=True)
class PFState:
    vm: np.ndarray
    va: np.ndarray  # radians

    @property
    def voltage(self) -> np.ndarray:
        return self.vm * np.exp(1j * self.va)


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-8
    max_iter: int = 30
    flat_start: bool = True

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


@dataclass(frozen=True)
class PFSolution:
    state: PFState
    q_gen: np.ndarray  # MVAr, aligned with net.gens
    p_slack: float  # MW delivered by the slack bus
    branch_p_from: np.ndarray
    branch_q_from: np.ndarray
    branch_p_to: np.ndarray
    branch_q_to: np.ndarray
    iterations: int
    max_mismatch: float


def power_injections(state: PFState, y: AdmittanceMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Network-side active and reactive injections at every bus, per unit."""
    vm, va = state.vm, state.va
    dth = va[:, None] - va[None, :]
    cos, sin = np.cos(dth), np.sin(dth)
    vv = vm[:, None] * vm[None, :]
    p = np.sum(vv * (y.g * cos + y.b * sin), axis=1)
    q = np.sum(vv * (y.g * sin - y.b * cos), axis=1)
    return p, q


def mismatch(state, y, p_sched, q_sched, bus_kinds) -> np.ndarray:
    """Residuals [dP on non-slack buses, dQ on PQ buses] of the nodal balance."""
    kinds = np.asarray(bus_kinds)
    p, q = power_injections(state, y)
    dp = np.asarray(p_sched) - p
    dq = np.asarray(q_sched) - q
    return np.concatenate([dp[kinds != BusKind.SLACK], dq[kinds == BusKind.PQ]])


def initial_state(net: Network, opts: SolverOptions) -> PFState:
    vm = net.voltage_setpoints()
    va = np.zeros(net.n_bus)
    if not opts.flat_start:
        for i, bus in enumerate(net.buses):
            if bus.kind == BusKind.PQ:
                vm[i] = bus.v_init
            va[i] = np.deg2rad(bus.a_init)
        va[net.slack] = 0.0
    return PFState(vm, va)


def newton(ybus: np.ndarray, s_sched: np.ndarray, v0: np.ndarray, slack: int,
           pv: np.ndarray, pq: np.ndarray, tol: float, max_iter: int):
    """Full Newton iteration in polar coordinates.

    Returns ``(V, iterations, residual)``; raises NonConvergence or
    SingularJacobian.
    """
    v = v0.astype(complex)
    pvpq = np.concatenate([pv, pq])
    npvpq = len(pvpq)

    def residual(v):
        s = v * np.conj(ybus @ v)
        f = s - s_sched
        return np.concatenate([f[pvpq].real, f[pq].imag])

    f = residual(v)
    norm = np.max(np.abs(f), initial=0.0)
    it = 0
    while norm >= tol:
        if it >= max_iter:
            raise NonConvergence(it, norm)
        it += 1
        ibus = ybus @ v
        vnorm = v / np.abs(v)
        dva = 1j * v[:, None] * np.conj(np.diag(ibus) - ybus * v[None, :])
        dvm = v[:, None] * np.conj(ybus * vnorm[None, :]) + np.diag(np.conj(ibus) * vnorm)
        jac = np.block([
            [dva[np.ix_(pvpq, pvpq)].real, dvm[np.ix_(pvpq, pq)].real],
            [dva[np.ix_(pq, pvpq)].imag, dvm[np.ix_(pq, pq)].imag],
        ])
        try:
            dx = lu_solve(jac, -f)
        except SingularMatrix as exc:
            raise SingularJacobian(str(exc)) from exc
        va = np.angle(v)
        vm = np.abs(v)
        va[pvpq] += dx[:npvpq]
        vm[pq] += dx[npvpq:]
        v = vm * np.exp(1j * va)
        f = residual(v)
        norm = np.max(np.abs(f))
        if not np.isfinite(norm):
            raise NonConvergence(it, norm)
    return v, it, norm


def solve_nr(net: Network, opts: SolverOptions | None = None, ybus: AdmittanceMatrix | None = None) -> PFSolution:
    opts = opts or SolverOptions()
    y = ybus if ybus is not None else build_ybus(net)
    p, q = net_injections(net)
    st = initial_state(net, opts)
    v, it, norm = newton(y.complex, p + 1j * q, st.voltage, net.slack, net.pv(), net.pq(),
                         opts.tol, opts.max_iter)
    return _finish(net, y, PFState(np.abs(v), np.angle(v)), it, norm)


def solve_gs(net: Network, opts: SolverOptions | None = None) -> PFSolution:
    """Gauss-Seidel sweeps; PV magnitudes are projected back onto their setpoints."""
    opts = opts or SolverOptions(max_iter=5000)
    y = build_ybus(net)
    ybus = y.complex
    p, q = net_injections(net)
    kinds = net.kinds()
    st = initial_state(net, opts)
    v = st.voltage.astype(complex)
    vset = st.vm.copy()
    order = [i for i in range(net.n_bus) if kinds[i] != BusKind.SLACK]

    def resid(v):
        return mismatch(PFState(np.abs(v), np.angle(v)), y, p, q, kinds)

    norm = np.max(np.abs(resid(v)), initial=0.0)
    it = 0
    while norm >= opts.tol:
        if it >= opts.max_iter:
            raise NonConvergence(it, norm)
        it += 1
        for i in order:
            acc = ybus[i] @ v
            qi = q[i]
            if kinds[i] == BusKind.PV:
                qi = float(np.imag(v[i] * np.conj(acc)))
            vi = ((p[i] - 1j * qi) / np.conj(v[i]) - (acc - ybus[i, i] * v[i])) / ybus[i, i]
            if kinds[i] == BusKind.PV:
                vi = vset[i] * vi / abs(vi)
            v[i] = vi
        norm = np.max(np.abs(resid(v)))
        if not np.isfinite(norm):
            raise NonConvergence(it, norm)
    return _finish(net, y, PFState(np.abs(v), np.angle(v)), it, norm)


def two_port_arrays(net: Network):
    """Per-branch endpoint indices and two-port entries; zeros for out-of-service branches."""
    m = net.n_branch
    f = np.zeros(m, dtype=int)
    t = np.zeros(m, dtype=int)
    y = np.zeros((4, m), dtype=complex)
    for k, br in enumerate(net.branches):
        f[k], t[k] = net.index_of(br.from_bus), net.index_of(br.to_bus)
        if br.status:
            y[:, k] = branch_admittances(br)
    return f, t, y


def flows_from_voltage(v: np.ndarray, ports, base_mva: float):
    f, t, (yff, yft, ytf, ytt) = ports
    sf = v[f] * np.conj(yff * v[f] + yft * v[t]) * base_mva
    st = v[t] * np.conj(ytf * v[f] + ytt * v[t]) * base_mva
    return sf.real, sf.imag, st.real, st.imag


def branch_flows_ac(state: PFState, net: Network):
    """From/to-side (P, Q) per branch in MW/MVAr; out-of-service branches carry zero."""
    return flows_from_voltage(state.voltage, two_port_arrays(net), net.base_mva)


def _finish(net, y, state, iterations, norm) -> PFSolution:
    pf, qf, pt, qt = branch_flows_ac(state, net)
    p_calc, q_calc = power_injections(state, y)
    base = net.base_mva
    q_bus = q_calc * base + np.array([b.q_demand for b in net.buses])
    counts = np.zeros(net.n_bus)
    for g in net.gens:
        if g.status:
            counts[net.index_of(g.bus)] += 1
    q_gen = np.array([
        q_bus[net.index_of(g.bus)] / counts[net.index_of(g.bus)] if g.status else 0.0
        for g in net.gens
    ])
    s = net.slack
    p_slack = p_calc[s] * base + net.buses[s].p_demand
    return PFSolution(state, q_gen, float(p_slack), pf, qf, pt, qt, iterations, float(norm))


def solution_to_dict(net: Network, sol: PFSolution) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "kind": "acpf",
        "base_mva": net.base_mva,
        "iterations": sol.iterations,
        "max_mismatch": sol.max_mismatch,
        "buses": [
            {"id": b.id, "type": b.kind.name, "vm": float(sol.state.vm[i]),
             "va_deg": float(np.rad2deg(sol.state.va[i]))}
            for i, b in enumerate(net.buses)
        ],
        "branches": [
            {"index": k, "from": br.from_bus, "to": br.to_bus,
             "p_from_mw": float(sol.branch_p_from[k]), "q_from_mvar": float(sol.branch_q_from[k]),
             "p_to_mw": float(sol.branch_p_to[k]), "q_to_mvar": float(sol.branch_q_to[k])}
            for k, br in enumerate(net.branches)
        ],
    }
