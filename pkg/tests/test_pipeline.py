import json

import numpy as np
import pytest

from pfsurrogate.dataset import generate_samples
from pfsurrogate.pipeline import Checkpoint, PipelineConfig, compare_model, evaluate, trace_csv, train_model

SMALL = dict(hidden=(8, 8), epochs=4, learning_rate=0.1, batch_size=16, seed=2)


@pytest.fixture(scope="module")
def samples(nets, case_text):
    return generate_samples(nets["case9"], 50, seed=1, system_tag="case9", case_text=case_text["case9"])


@pytest.mark.parametrize("separate", [False, True])
def test_checkpoint_round_trip(samples, tmp_path, separate):
    ckpt, traces = train_model(samples, PipelineConfig(separate_heads=separate, **SMALL))
    assert len(ckpt.heads) == len(traces) == (2 if separate else 1)
    path = tmp_path / "m.pfnn.json"
    ckpt.save(path)
    doc = json.loads(path.read_text())
    assert doc["format_version"] == 1 and doc["train_config"]["separate_heads"] is separate
    back = Checkpoint.load(path)
    vm, pk = ckpt.predict(samples.inputs)
    vm2, pk2 = back.predict(samples.inputs)
    assert np.array_equal(vm, vm2) and np.array_equal(pk, pk2)
    assert vm.shape == (50, 9) and pk.shape == (50, 9)


def test_separate_heads_cover_disjoint_columns(samples):
    ckpt, traces = train_model(samples, PipelineConfig(separate_heads=True, **SMALL))
    assert [h.columns for h in ckpt.heads] == [(0, 9), (9, 18)]
    assert ckpt.heads[0].model.layer_dims == [27, 8, 8, 9]
    assert trace_csv(traces).splitlines()[0] == "head,epoch,train_mse,val_mse,val_mae"


def test_evaluate_and_compare_use_test_split(samples):
    ckpt, _ = train_model(samples, PipelineConfig(**SMALL))
    assert evaluate(ckpt, samples)["test_samples"] == 5
    rep = compare_model(ckpt, samples, thresholds=(50,))
    assert rep.n_samples == 5 and rep.n_branch == 9


def test_compare_rejects_mismatched_network(samples, nets):
    ckpt, _ = train_model(samples, PipelineConfig(**SMALL))
    with pytest.raises(ValueError):
        compare_model(ckpt, samples, net=nets["case24"])


def test_unknown_format_version(samples):
    ckpt, _ = train_model(samples, PipelineConfig(**SMALL))
    doc = ckpt.to_dict()
    doc["format_version"] = 99
    with pytest.raises(ValueError):
        Checkpoint.from_dict(doc)
