"""Lossless DC power flow: unit magnitudes, no reactive power, 1/x weights."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import SingularMatrix, lu_solve
from .netmodel import Network, net_injections

FORMAT_VERSION = 1


class SingularSystem(ArithmeticError):
    pass


@dataclass(frozen=True)
class DcSolution:
    va: np.ndarray  # radians, slack = 0
    branch_p: np.ndarray  # MW, from side
    p_inj: np.ndarray  # per unit, slack entry balances the rest


@dataclass(frozen=True)
class DcModel:
    """Topology-only pieces of the DC model, reusable across injection vectors."""

    bbus: np.ndarray
    bf: np.ndarray
    pf_shift: np.ndarray  # per-unit from-side flow offset due to phase shifters
    pbus_shift: np.ndarray
    slack: int
    base_mva: float

    @classmethod
    def from_network(cls, net: Network) -> DcModel:
        n, m = net.n_bus, net.n_branch
        bf = np.zeros((m, n))
        pf_shift = np.zeros(m)
        for k, br in enumerate(net.branches):
            if not br.status:
                continue
            if br.x == 0:
                raise SingularSystem(f"branch {br.from_bus}-{br.to_bus} has zero reactance")
            w = 1.0 / (br.x * br.tap)
            bf[k, net.index_of(br.from_bus)] = w
            bf[k, net.index_of(br.to_bus)] = -w
            pf_shift[k] = -w * np.deg2rad(br.shift)
        # incidence^T @ bf
        cft = np.zeros((n, m))
        for k, br in enumerate(net.branches):
            cft[net.index_of(br.from_bus), k] = 1.0
            cft[net.index_of(br.to_bus), k] = -1.0
        return cls(cft @ bf, bf, pf_shift, cft @ pf_shift, net.slack, net.base_mva)

    def solve(self, p: np.ndarray) -> DcSolution:
        """Solve for per-unit net injections ``p``; the slack entry of ``p`` is ignored."""
        n = len(p)
        keep = np.arange(n) != self.slack
        rhs = (np.asarray(p, dtype=float) - self.pbus_shift)[keep]
        try:
            theta_red = lu_solve(self.bbus[np.ix_(keep, keep)], rhs)
        except SingularMatrix as exc:
            raise SingularSystem(f"DC system is singular (disconnected network?): {exc}") from exc
        va = np.zeros(n)
        va[keep] = theta_red
        flows = self.bf @ va + self.pf_shift
        p_inj = self.bbus @ va + self.pbus_shift
        return DcSolution(va, flows * self.base_mva, p_inj)


def solve_dc(net: Network) -> DcSolution:
    p, _ = net_injections(net)
    return DcModel.from_network(net).solve(p)


def solution_to_dict(net: Network, sol: DcSolution) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "kind": "dcpf",
        "base_mva": net.base_mva,
        "buses": [
            {"id": b.id, "type": b.kind.name, "vm": 1.0, "va_deg": float(np.rad2deg(sol.va[i])),
             "p_inj_mw": float(sol.p_inj[i] * net.base_mva)}
            for i, b in enumerate(net.buses)
        ],
        "branches": [
            {"index": k, "from": br.from_bus, "to": br.to_bus,
             "p_from_mw": float(sol.branch_p[k]), "q_from_mvar": None,
             "p_to_mw": float(-sol.branch_p[k]), "q_to_mvar": None}
            for k, br in enumerate(net.branches)
        ],
    }
