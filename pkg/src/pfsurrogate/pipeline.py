"""Train / evaluate / compare workflow and the ``.pfnn.json`` checkpoint format.

Random streams derived from the single training seed ``s``:

* split permutation: ``default_rng(s)``
* weight init of head ``h``: ``default_rng([s, 0, h])``
* minibatch shuffling: ``default_rng(s)`` inside :func:`mlp.train`
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import mlp
from .caseparse import parse_case
from .dataset import NormScaler, SampleSet, fit_scaler, split
from .dcpf import DcModel
from .metrics import EvalReport, compare

FORMAT_VERSION = 1


@dataclass(frozen=True)
class PipelineConfig:
    hidden: tuple[int, ...] = mlp.DEFAULT_HIDDEN
    leak: float = mlp.DEFAULT_LEAK
    learning_rate: float = 0.3
    batch_size: int = 64
    epochs: int = 600
    seed: int = 0
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)
    separate_heads: bool = False

    def train_config(self) -> mlp.TrainConfig:
        return mlp.TrainConfig(self.learning_rate, self.batch_size, self.epochs, self.seed)


@dataclass
class Head:
    columns: tuple[int, int]
    model: mlp.MlpModel


@dataclass
class Checkpoint:
    heads: list[Head]
    in_scaler: NormScaler
    out_scaler: NormScaler
    system_tag: str
    base_case_hash: str
    n_bus: int
    n_branch: int
    config: PipelineConfig
    final_metrics: dict = field(default_factory=dict)

    def forward_normalized(self, x_norm: np.ndarray) -> np.ndarray:
        out = np.zeros((np.atleast_2d(x_norm).shape[0], self.n_bus + self.n_branch))
        for head in self.heads:
            a, b = head.columns
            out[:, a:b] = mlp.forward(head.model, np.atleast_2d(x_norm))
        return out

    def predict(self, raw_inputs) -> tuple[np.ndarray, np.ndarray]:
        """Raw inputs to (voltage magnitudes pu, from-side flows MW)."""
        if len(self.heads) == 1:
            return mlp.predict_pf(self.heads[0].model, self.in_scaler, self.out_scaler, raw_inputs)
        out = self.out_scaler.denormalize(self.forward_normalized(self.in_scaler.normalize(raw_inputs)))
        return out[:, :self.n_bus], out[:, self.n_bus:]

    def to_dict(self) -> dict:
        cfg = asdict(self.config)
        return {
            "format_version": FORMAT_VERSION,
            "system_tag": self.system_tag,
            "base_case_hash": self.base_case_hash,
            "layout": {"n_bus": self.n_bus, "n_branch": self.n_branch},
            "heads": [dict(columns=list(h.columns), **h.model.to_dict()) for h in self.heads],
            "in_scaler": self.in_scaler.to_dict(),
            "out_scaler": self.out_scaler.to_dict(),
            "train_config": {**cfg, "hidden": list(cfg["hidden"]), "ratios": list(cfg["ratios"])},
            "final_metrics": self.final_metrics,
        }

    @classmethod
    def from_dict(cls, d) -> Checkpoint:
        if d.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint format_version {d.get('format_version')}")
        cfg = dict(d["train_config"])
        cfg["hidden"] = tuple(cfg["hidden"])
        cfg["ratios"] = tuple(cfg["ratios"])
        heads = [Head(tuple(h["columns"]), mlp.MlpModel.from_dict(h)) for h in d["heads"]]
        return cls(heads, NormScaler.from_dict(d["in_scaler"]), NormScaler.from_dict(d["out_scaler"]),
                   d["system_tag"], d["base_case_hash"], d["layout"]["n_bus"], d["layout"]["n_branch"],
                   PipelineConfig(**cfg), d.get("final_metrics", {}))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), separators=(",", ":")) + "\n")

    @classmethod
    def load(cls, path) -> Checkpoint:
        return cls.from_dict(json.loads(Path(path).read_text()))


def train_model(samples: SampleSet, config: PipelineConfig, on_epoch=None):
    """Split, fit scalers on the training part, train. Returns ``(checkpoint, traces)``."""
    parts = split(samples, config.ratios, config.seed)
    in_scaler = fit_scaler(parts.train, "inputs")
    out_scaler = fit_scaler(parts.train, "outputs")
    xt, xv = in_scaler.normalize(parts.train.inputs), in_scaler.normalize(parts.val.inputs)
    yt, yv = out_scaler.normalize(parts.train.outputs), out_scaler.normalize(parts.val.outputs)
    n_bus, n_out = samples.n_bus, samples.outputs.shape[1]
    spans = [(0, n_bus), (n_bus, n_out)] if config.separate_heads else [(0, n_out)]
    heads, traces = [], []
    for h, (a, b) in enumerate(spans):
        dims = [xt.shape[1], *config.hidden, b - a]
        model = mlp.init_model(dims, config.leak, seed=[config.seed, 0, h])
        model, trace = mlp.train(model, xt, yt[:, a:b], xv, yv[:, a:b], config.train_config(), on_epoch)
        heads.append(Head((a, b), model))
        traces.append(trace)
    ckpt = Checkpoint(heads, in_scaler, out_scaler, samples.system_tag, samples.base_case_hash,
                      n_bus, samples.n_branch, config)
    ckpt.final_metrics = {
        "train_mse": float(mlp.loss_mse(yt, ckpt.forward_normalized(xt))),
        "val_mse": float(mlp.loss_mse(yv, ckpt.forward_normalized(xv))),
        "best_epoch": [t.best_epoch for t in traces],
    }
    return ckpt, traces


def trace_csv(traces) -> str:
    if len(traces) == 1:
        return traces[0].to_csv()
    lines = ["head,epoch,train_mse,val_mse,val_mae"]
    for h, t in enumerate(traces):
        lines += [f"{h},{row}" for row in t.to_csv().splitlines()[1:]]
    return "\n".join(lines) + "\n"


def held_out(ckpt: Checkpoint, samples: SampleSet) -> SampleSet:
    return split(samples, ckpt.config.ratios, ckpt.config.seed).test


def evaluate(ckpt: Checkpoint, samples: SampleSet) -> dict:
    """Test-split accuracy of the surrogate alone."""
    test = held_out(ckpt, samples)
    vm, pk = ckpt.predict(test.inputs)
    n = ckpt.n_bus
    y_norm = ckpt.out_scaler.normalize(test.outputs)
    pred_norm = ckpt.out_scaler.normalize(np.hstack([vm, pk]))
    return {
        "format_version": FORMAT_VERSION,
        "system_tag": ckpt.system_tag,
        "test_samples": len(test),
        "normalized_mse": mlp.loss_mse(y_norm, pred_norm),
        "vm_mae_pu": float(np.mean(np.abs(vm - test.outputs[:, :n]))),
        "flow_mae_mw": float(np.mean(np.abs(pk - test.outputs[:, n:]))),
    }


def dc_flows(net, raw_inputs: np.ndarray) -> np.ndarray:
    """DCPF from-side flows (MW) for each raw input row, using its active injections."""
    model = DcModel.from_network(net)
    n = net.n_bus
    return np.array([model.solve(x[n:2 * n]).branch_p for x in np.atleast_2d(raw_inputs)])


def compare_model(ckpt: Checkpoint, samples: SampleSet, thresholds=(), net=None) -> EvalReport:
    """NN and DCPF against the ACPF labels of the test split."""
    if net is None:
        text = samples.meta.get("case_text")
        if text is None:
            raise ValueError("dataset carries no case text; pass the network explicitly")
        net = parse_case(text)
    if net.n_bus != ckpt.n_bus or net.n_branch != ckpt.n_branch:
        raise ValueError("network does not match the checkpoint layout")
    test = held_out(ckpt, samples)
    vm, pk = ckpt.predict(test.inputs)
    n = ckpt.n_bus
    return compare(pk, dc_flows(net, test.inputs), test.outputs[:, n:], vm, test.outputs[:, :n],
                   thresholds, ckpt.system_tag)
