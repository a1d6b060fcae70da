import logging

import numpy as np
import pytest
import torch

from adcss.config import ModelConfig
from adcss.errors import InvalidInputError
from adcss.model import build_model, frame_count
from helpers import finite_difference_check, random_example, relative_error, tiny_model


def test_forward_train_shapes_ten_seconds():
    model = tiny_model(dtype=torch.float32)
    out = model.forward_train(torch.randn(160000), 2)
    T = frame_count(160000, 16)
    assert out.estimates.shape == (2, 160000)
    assert out.activity.shape == (2, T)
    assert out.existence.shape == (3,)


def test_forward_train_unaligned_length():
    model = tiny_model(dtype=torch.float32)
    out = model.forward_train(torch.randn(1001), 3)
    assert out.estimates.shape == (3, 1001)


def test_forward_train_rejects_zero_speakers():
    with pytest.raises(InvalidInputError):
        tiny_model().forward_train(torch.randn(800, dtype=torch.float64), 0)


def test_loss_deterministic():
    model = tiny_model()
    mixture, refs, labels = random_example(4000, 2, 16)
    a, _ = model.loss(model.forward_train(mixture, 2), refs, labels)
    b, _ = model.loss(model.forward_train(mixture, 2), refs, labels)
    assert a.item() == b.item()


def test_build_model_seeded():
    a, b = build_model(ModelConfig(D=8, F=8, K=4, num_heads=2, n_triple=1), 3), \
        build_model(ModelConfig(D=8, F=8, K=4, num_heads=2, n_triple=1), 3)
    for (n, p), (_, q) in zip(a.state_dict().items(), b.state_dict().items()):
        assert torch.equal(p, q), n


def test_joint_loss_gradient_finite_differences():
    model = tiny_model(seed=1)
    mixture, refs, labels = random_example(8000, 2, 16, seed=1)

    def loss():
        total, _ = model.loss(model.forward_train(mixture, 2), refs, labels)
        return total

    checks = finite_difference_check(loss, list(model.named_parameters()), 20, np.random.default_rng(0))
    bad = [(n, i, a, f) for n, i, a, f in checks if relative_error(a, f) > 1e-3]
    assert not bad


def test_infer_counts_from_existence(monkeypatch):
    model = tiny_model(dtype=torch.float32, J_max=4)
    wav = torch.randn(3200)
    original = model.attractor.forward

    def fixed(d, J):
        out = original(d, J)
        out.existence = torch.tensor([[0.9, 0.8, 0.2, 0.1, 0.05]])
        return out

    monkeypatch.setattr(model.attractor, "forward", fixed)
    result = model.infer(wav)
    assert result.count == 2
    assert result.estimates.shape == (2, 3200)
    assert result.activity.shape == (2, frame_count(3200, 16))
    assert set(result.activity.unique().tolist()) <= {0, 1}


def test_infer_zero_count_warns(monkeypatch, caplog):
    model = tiny_model(dtype=torch.float32)
    original = model.attractor.forward

    def silent(d, J):
        out = original(d, J)
        out.existence = torch.full_like(out.existence, 0.1)
        return out

    monkeypatch.setattr(model.attractor, "forward", silent)
    with caplog.at_level(logging.WARNING):
        result = model.infer(torch.randn(1600))
    assert result.count == 0 and result.estimates.shape == (0, 1600)
    assert result.warning and "no speaker" in caplog.text


@pytest.mark.parametrize("style,diar", [("none", False), ("transformer", False), ("transformer", True),
                                        ("rnn", False), ("rnn", True)])
def test_ablation_configurations_run(style, diar):
    model = tiny_model(dtype=torch.float32, attractor_style=style, diar_branch=diar)
    mixture, refs, labels = random_example(2400, 2, 16, dtype=torch.float32)
    loss, parts = model.loss(model.forward_train(mixture, 2), refs, labels)
    loss.backward()
    assert torch.isfinite(loss)
    assert (parts["diar"] is not None) == (diar and style != "none")
    assert (parts["exist"] is not None) == (style != "none")
    result = model.infer(mixture)
    if style == "none":
        assert result.count == 2


def test_fixed_speaker_model_rejects_other_counts():
    model = tiny_model(attractor_style="none")
    with pytest.raises(InvalidInputError):
        model.forward_train(torch.randn(800, dtype=torch.float64), 3)


def test_tied_permutations_use_separation_mapping():
    model = tiny_model(tie_permutations=True)
    mixture, refs, labels = random_example(2400, 2, 16)
    loss, parts = model.loss(model.forward_train(mixture, 2), refs, labels)
    assert torch.isfinite(loss) and parts["diar"] is not None


def test_separator_equivariance_in_model():
    model = tiny_model()
    _, d_out, _ = model._embed(torch.randn(1, 2400, dtype=torch.float64))
    a = torch.randn(1, 3, 8, dtype=torch.float64)
    perm = [2, 0, 1]
    out = model._separate(d_out, a, 2400)
    out_p = model._separate(d_out, a[:, perm], 2400)
    assert torch.allclose(out_p, out[:, perm], atol=1e-8)
