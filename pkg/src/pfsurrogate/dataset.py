"""Labelled sample generation, min-max scaling and train/val/test splitting.

Sample layout
-------------
input  : [voltage setpoint per bus | net active injection per bus | load reactive injection per bus]
         all per unit; PQ buses report 1.0 as their setpoint.
output : [solved voltage magnitude per bus (pu) | from-side active flow per branch (MW)]

Randomness: sample ``j`` (attempt ``a``) draws from
``SeedSequence(seed, spawn_key=(j, a))``, so results do not depend on the
order or process in which samples are solved.
"""
from __future__ import annotations

import concurrent.futures
import hashlib
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .acpf import NonConvergence, SingularJacobian, flows_from_voltage, newton, two_port_arrays
from .netmodel import BusKind, Generator, Network, build_ybus

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
SOLVER_TOL = 1e-8
SOLVER_MAX_ITER = 30


class EmptySet(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


class TooManyRejections(RuntimeError):
    pass


@dataclass(frozen=True)
class SampleSet:
    inputs: np.ndarray  # (count, 3 * n_bus)
    outputs: np.ndarray  # (count, n_bus + n_branch)
    system_tag: str
    seed: int
    base_case_hash: str
    n_bus: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.inputs.shape[0] != self.outputs.shape[0]:
            raise DimensionMismatch("inputs and outputs disagree on sample count")

    def __len__(self):
        return self.inputs.shape[0]

    @property
    def n_branch(self) -> int:
        return self.outputs.shape[1] - self.n_bus

    def subset(self, index) -> SampleSet:
        return replace(self, inputs=self.inputs[index], outputs=self.outputs[index])


@dataclass(frozen=True)
class SplitSet:
    train: SampleSet
    val: SampleSet
    test: SampleSet


def case_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


class _Labeler:
    """Cached per-network arrays for repeated perturb-and-solve."""

    def __init__(self, net: Network):
        self.net = net
        self.ybus = build_ybus(net).complex
        self.ports = two_port_arrays(net)
        self.base = net.base_mva
        self.slack = net.slack
        self.pv = net.pv()
        self.pq = net.pq()
        self.regulated = net.kinds() != BusKind.PQ
        self.pd = np.array([b.p_demand for b in net.buses])
        self.qd = np.array([b.q_demand for b in net.buses])
        self.pg_bus = np.zeros(net.n_bus)
        for g in net.gens:
            if g.status:
                self.pg_bus[net.index_of(g.bus)] += g.p_gen
        self.vset = net.voltage_setpoints()

    def draw(self, rng: np.random.Generator, perturb: float, perturb_voltage: bool):
        n = self.net.n_bus
        factors = rng.uniform(1.0 - perturb, 1.0 + perturb, size=(3, n))
        pd = self.pd * factors[0]
        qd = self.qd * factors[1]
        total = self.pd.sum()
        gen_scale = pd.sum() / total if total != 0 else 1.0
        vset = self.vset.copy()
        if perturb_voltage:
            vset[self.regulated] *= factors[2][self.regulated]
        p = (self.pg_bus * gen_scale - pd) / self.base
        q = -qd / self.base
        return np.concatenate([vset, p, q])

    def label(self, x: np.ndarray) -> np.ndarray:
        n = self.net.n_bus
        vset, p, q = x[:n], x[n:2 * n], x[2 * n:]
        v, _, _ = newton(self.ybus, p + 1j * q, vset.astype(complex), self.slack, self.pv, self.pq,
                         SOLVER_TOL, SOLVER_MAX_ITER)
        pf, _, _, _ = flows_from_voltage(v, self.ports, self.base)
        return np.concatenate([np.abs(v), pf])


def _solve_range(net, indices, perturb, seed, perturb_voltage, max_attempts):
    lab = _Labeler(net)
    xs, ys, rejected = [], [], []
    for j in indices:
        for attempt in range(max_attempts):
            rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(j, attempt)))
            x = lab.draw(rng, perturb, perturb_voltage)
            try:
                y = lab.label(x)
            except (NonConvergence, SingularJacobian):
                rejected.append((j, attempt))
                continue
            xs.append(x)
            ys.append(y)
            break
        else:
            raise TooManyRejections(f"sample {j}: {max_attempts} consecutive non-convergent draws")
    return xs, ys, rejected


def generate_samples(net: Network, count: int, perturb: float = 0.1, seed: int = 0, *,
                     perturb_voltage: bool = True, workers: int = 1,
                     system_tag: str = "", case_text: str | None = None) -> SampleSet:
    """Perturb loads (and regulated voltage setpoints) uniformly and label with Newton-Raphson.

    Generator active outputs are rescaled by (new total demand / base total
    demand). Output is bit-identical for any ``workers``.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    if not 0 <= perturb < 1:
        raise ValueError("perturb must lie in [0, 1)")
    max_rejections = 10 * count
    chunks = np.array_split(np.arange(count), max(1, min(workers, count)))
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(
                _solve_range, [net] * len(chunks), [c.tolist() for c in chunks],
                [perturb] * len(chunks), [seed] * len(chunks), [perturb_voltage] * len(chunks),
                [max_rejections + 1] * len(chunks)))
    else:
        parts = [_solve_range(net, chunks[0].tolist(), perturb, seed, perturb_voltage, max_rejections + 1)]
    xs = [x for part in parts for x in part[0]]
    ys = [y for part in parts for y in part[1]]
    rejected = [r for part in parts for r in part[2]]
    for j, attempt in rejected:
        log.warning("rejected non-convergent draw: seed=%d sample=%d attempt=%d", seed, j, attempt)
    if len(rejected) > max_rejections:
        raise TooManyRejections(f"{len(rejected)} rejected draws for {count} samples")
    text_hash = case_hash(case_text) if case_text is not None else ""
    meta = {
        "perturb": perturb,
        "perturb_voltage": perturb_voltage,
        "rejected": len(rejected),
        "bus_ids": net.bus_ids,
        "branches": [[br.from_bus, br.to_bus] for br in net.branches],
    }
    if case_text is not None:
        meta["case_text"] = case_text
    return SampleSet(np.array(xs), np.array(ys), system_tag, seed, text_hash, net.n_bus, meta)


def network_from_input(net: Network, x: np.ndarray) -> Network:
    """Rebuild a network whose scheduled injections and setpoints equal input vector ``x``."""
    n = net.n_bus
    vset, p, q = x[:n], x[n:2 * n], x[2 * n:]
    base = net.base_mva
    buses = [replace(b, p_demand=-p[i] * base, q_demand=-q[i] * base) for i, b in enumerate(net.buses)]
    gens, seen = [], set()
    for g in net.gens:
        i = net.index_of(g.bus)
        if g.status and i not in seen and net.buses[i].kind != BusKind.PQ:
            gens.append(Generator(bus=g.bus, p_gen=0.0, v_set=float(vset[i])))
            seen.add(i)
    return Network(base_mva=base, buses=buses, branches=net.branches, gens=gens)


def split(samples: SampleSet, ratios=(0.8, 0.1, 0.1), seed: int = 0) -> SplitSet:
    n = len(samples)
    if n == 0:
        raise EmptySet("cannot split an empty sample set")
    if len(ratios) != 3 or min(ratios) <= 0 or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be three positive numbers summing to 1, got {ratios}")
    perm = np.random.default_rng(seed).permutation(n)
    n_val = math.floor(n * ratios[1] + 1e-9)
    n_test = math.floor(n * ratios[2] + 1e-9)
    n_train = n - n_val - n_test
    return SplitSet(
        train=samples.subset(perm[:n_train]),
        val=samples.subset(perm[n_train:n_train + n_val]),
        test=samples.subset(perm[n_train + n_val:]),
    )


@dataclass(frozen=True)
class NormScaler:
    feature_min: np.ndarray
    feature_max: np.ndarray

    @property
    def span(self) -> np.ndarray:
        span = self.feature_max - self.feature_min
        return np.where(span > 0, span, 1.0)

    def _check(self, v):
        v = np.asarray(v, dtype=float)
        if v.shape[-1] != self.feature_min.shape[0]:
            raise DimensionMismatch(f"expected {self.feature_min.shape[0]} features, got {v.shape[-1]}")
        return v

    def normalize(self, v) -> np.ndarray:
        v = self._check(v)
        out = (v - self.feature_min) / self.span
        return np.where(self.feature_max > self.feature_min, out, 0.0)

    def denormalize(self, v) -> np.ndarray:
        v = self._check(v)
        return v * (self.feature_max - self.feature_min) + self.feature_min

    def to_dict(self) -> dict:
        return {"feature_min": self.feature_min.tolist(), "feature_max": self.feature_max.tolist()}

    @classmethod
    def from_dict(cls, d) -> NormScaler:
        return cls(np.asarray(d["feature_min"], dtype=float), np.asarray(d["feature_max"], dtype=float))


def fit_scaler(samples: SampleSet | np.ndarray, which: str = "inputs") -> NormScaler:
    """Per-feature min/max; pass the training split only."""
    if isinstance(samples, SampleSet):
        if which not in ("inputs", "outputs"):
            raise ValueError("which must be 'inputs' or 'outputs'")
        data = samples.inputs if which == "inputs" else samples.outputs
    else:
        data = np.atleast_2d(np.asarray(samples, dtype=float))
    if data.shape[0] == 0:
        raise EmptySet("cannot fit a scaler on an empty set")
    return NormScaler(data.min(axis=0), data.max(axis=0))


def normalize(scaler: NormScaler, v) -> np.ndarray:
    return scaler.normalize(v)


def denormalize(scaler: NormScaler, v) -> np.ndarray:
    return scaler.denormalize(v)


def save_samples(samples: SampleSet, path) -> None:
    doc = {
        "format_version": FORMAT_VERSION,
        "system_tag": samples.system_tag,
        "seed": samples.seed,
        "base_case_hash": samples.base_case_hash,
        "dims": {"count": len(samples), "n_bus": samples.n_bus, "n_branch": samples.n_branch,
                 "input": samples.inputs.shape[1], "output": samples.outputs.shape[1]},
        "meta": samples.meta,
        "inputs": samples.inputs.tolist(),
        "outputs": samples.outputs.tolist(),
    }
    Path(path).write_text(json.dumps(doc, separators=(",", ":")) + "\n")


def load_samples(path) -> SampleSet:
    doc = json.loads(Path(path).read_text())
    if doc.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported format_version {doc.get('format_version')}")
    dims = doc["dims"]
    inputs = np.asarray(doc["inputs"], dtype=float).reshape(dims["count"], dims["input"])
    outputs = np.asarray(doc["outputs"], dtype=float).reshape(dims["count"], dims["output"])
    return SampleSet(inputs, outputs, doc["system_tag"], doc["seed"], doc["base_case_hash"],
                     dims["n_bus"], doc.get("meta", {}))
