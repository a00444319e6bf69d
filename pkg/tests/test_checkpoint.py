import numpy as np
import pytest

from dlgn import checkpoint as ckpt
from dlgn.init import InitScheme
from dlgn.network import EncoderConfig, NetworkConfig, build_network
from dlgn.train import AdamState, Dataset, TrainConfig, Trainer


def make(par="iwp", width=16, res=None):
    cfg = NetworkConfig(layer_width=width, base_layers=3, parametrization=par,
                        init=InitScheme.residual(), residual_fraction=res)
    return build_network(cfg, EncoderConfig(4, 2), 7)


def test_save_load_save_is_byte_identical(tmp_path):
    net = make(res=(0.2, 0.5))
    data = Dataset(np.random.default_rng(0).random((20, 4)), np.arange(20) % 2, 2)
    tr = Trainer(net, data, TrainConfig(steps=3, batch_size=5))
    tr.run()
    ck = ckpt.Checkpoint(net, tr.state, tr.step, "seed = 0\n", 0)
    ckpt.save(tmp_path / "a", ck)
    back = ckpt.load(tmp_path / "a")
    ckpt.save(tmp_path / "b", back)
    assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()
    assert back.step == 3 and back.state.t == 3
    for la, lb in zip(net.layers, back.net.layers):
        assert np.array_equal(la.ia, lb.ia) and np.array_equal(la.fixed, lb.fixed)
        assert np.array_equal(la.logits, lb.logits)


def test_parametrization_mismatch_rejected(tmp_path):
    net = make("op")
    ckpt.save(tmp_path / "c", ckpt.Checkpoint(net, AdamState.zeros_like(net), 0))
    with pytest.raises(ckpt.CheckpointError, match="op"):
        ckpt.load(tmp_path / "c", expect="iwp")
    assert ckpt.load(tmp_path / "c", expect="op").net.parametrization.value == "op"


def test_corrupt_files_rejected(tmp_path):
    (tmp_path / "x").write_bytes(b"not a checkpoint")
    with pytest.raises(ckpt.CheckpointError, match="magic"):
        ckpt.load(tmp_path / "x")
    net = make()
    data = ckpt.to_bytes(ckpt.Checkpoint(net, AdamState.zeros_like(net), 0))
    with pytest.raises(ckpt.CheckpointError, match="truncated"):
        ckpt.from_bytes(data[:-8])


def test_iwp_logit_blocks_quarter_of_op():
    op, iwp = make("op"), make("iwp")
    so = ckpt.block_sizes(ckpt.to_bytes(ckpt.Checkpoint(op, AdamState.zeros_like(op), 0)))
    si = ckpt.block_sizes(ckpt.to_bytes(ckpt.Checkpoint(iwp, AdamState.zeros_like(iwp), 0)))
    for l in range(3):
        assert si[f"layer{l}.logits"] * 4 == so[f"layer{l}.logits"]
