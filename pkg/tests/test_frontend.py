import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from adcss.errors import InvalidConfigError, InvalidInputError
from adcss.frontend import (Decoder, Encoder, aligned_length, chunk, chunk_count, decode, encode,
                            num_frames, overlap_add)


def test_encode_frame_count_paper_defaults():
    enc = Encoder(L=16, F=256)
    fm = encode(torch.randn(16000), enc)
    assert fm.shape == (1999, 256)
    assert torch.all(fm >= 0)


def test_encode_zero_input_zero_bias():
    enc = Encoder(L=16, F=8)
    torch.nn.init.zeros_(enc.conv.bias)
    assert torch.count_nonzero(encode(torch.zeros(64), enc)) == 0


def test_encode_hand_computed():
    enc = Encoder(L=4, F=2)
    with torch.no_grad():
        enc.conv.weight.copy_(torch.tensor([[[1.0, 0.0, -1.0, 0.5]], [[-1.0, 2.0, 0.0, 0.0]]]))
        enc.conv.bias.copy_(torch.tensor([0.0, -1.0]))
    x = torch.tensor([1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0])
    # frames start at 0, 2, 4 (hop 2)
    # filter 0: x0 - x2 + 0.5 x3 ; filter 1: -x0 + 2 x1 - 1
    expected = []
    for start in (0, 2, 4):
        w = x[start:start + 4].tolist()
        f0 = w[0] - w[2] + 0.5 * w[3]
        f1 = -w[0] + 2 * w[1] - 1
        expected.append([max(f0, 0.0), max(f1, 0.0)])
    assert torch.allclose(encode(x, enc), torch.tensor(expected))


def test_encode_too_short():
    with pytest.raises(InvalidInputError):
        Encoder(L=16, F=4)(torch.zeros(10))


def test_decode_length_inverse():
    dec = Decoder(L=16, F=256)
    assert decode(torch.rand(1999, 256), dec).shape == (16000,)


def test_decode_zero():
    dec = Decoder(L=16, F=8)
    torch.nn.init.zeros_(dec.deconv.bias)
    assert torch.count_nonzero(decode(torch.zeros(5, 8), dec)) == 0


def test_decode_hand_computed():
    dec = Decoder(L=4, F=1)
    with torch.no_grad():
        dec.deconv.weight.copy_(torch.tensor([[[1.0, 2.0, 3.0, 4.0]]]))
        dec.deconv.bias.zero_()
    fm = torch.tensor([[2.0], [-1.0]])
    # frame 0 covers samples 0..3, frame 1 covers 2..5
    expected = torch.tensor([2.0, 4.0, 6.0 - 1.0, 8.0 - 2.0, -3.0, -4.0])
    assert torch.allclose(decode(fm, dec), expected)


def test_decode_feature_mismatch():
    with pytest.raises(InvalidInputError):
        Decoder(L=4, F=3)(torch.zeros(2, 5))


@pytest.mark.parametrize("n", [16, 24, 40, 16000])
def test_encode_decode_same_length_when_aligned(n):
    enc, dec = Encoder(16, 4), Decoder(16, 4)
    assert decode(encode(torch.randn(n), enc), dec).shape[-1] == n


def test_aligned_length():
    assert aligned_length(16000, 16) == 16000
    assert aligned_length(16001, 16) == 16008
    assert aligned_length(5, 16) == 16
    assert num_frames(aligned_length(16001, 16), 16) == 2000


def test_chunk_t8_k4():
    x = torch.arange(8.0).unsqueeze(-1)
    ct = chunk(x, 4)
    assert ct.values.shape == (4, 3, 1)
    assert ct.pad_len == 0
    starts = [int(ct.values[0, s, 0]) for s in range(3)]
    assert starts == [0, 2, 4]
    assert ct.values[:, 2, 0].tolist() == [4.0, 5.0, 6.0, 7.0]


def test_chunk_single():
    ct = chunk(torch.randn(4, 3), 4)
    assert ct.num_chunks == 1 and ct.pad_len == 0


def test_chunk_t7_k4_padding():
    x = torch.arange(1.0, 8.0).unsqueeze(-1)
    ct = chunk(x, 4)
    assert ct.num_chunks == 3 and ct.pad_len == 1
    assert ct.values[:, 2, 0].tolist() == [5.0, 6.0, 7.0, 0.0]


@pytest.mark.parametrize("K", [0, 3, -2])
def test_chunk_rejects_bad_k(K):
    with pytest.raises(InvalidConfigError):
        chunk(torch.randn(5, 2), K)


def test_chunk_count_formula():
    for T in range(1, 50):
        for K in (2, 4, 8, 16):
            starts = list(range(0, max(T - K, 0) + K // 2, K // 2))
            # enumerate chunk starts needed to cover T frames with hop K/2
            S = 1
            while (S - 1) * (K // 2) + K < T:
                S += 1
            assert chunk_count(T, K) == S, (T, K, starts)


def test_overlap_add_constant():
    ct = chunk(torch.zeros(11, 3), 4)
    ct = ct.replace(torch.full_like(ct.values, 2.5))
    assert torch.allclose(overlap_add(ct), torch.full((11, 3), 2.5))


def test_overlap_add_single_chunk_identity():
    x = torch.randn(3, 2)
    assert torch.equal(overlap_add(chunk(x, 4)), x)


def test_round_trip_random():
    rng = np.random.default_rng(0)
    for _ in range(50):
        T = int(rng.integers(5, 41))
        K = int(rng.choice([4, 8]))
        x = torch.from_numpy(rng.standard_normal((T, 3)))
        y = overlap_add(chunk(x, K))
        assert y.shape == x.shape
        assert torch.allclose(y, x, rtol=1e-6, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(T=st.integers(1, 120), half=st.integers(1, 12), lead=st.integers(0, 2))
def test_round_trip_property(T, half, lead):
    shape = (2,) * lead + (T, 3)
    x = torch.randn(shape, dtype=torch.float64)
    assert torch.allclose(overlap_add(chunk(x, 2 * half)), x, rtol=1e-6, atol=1e-12)


def test_encoder_nonnegative_any_weights():
    enc = Encoder(8, 6)
    with torch.no_grad():
        enc.conv.weight.normal_(0, 5)
        enc.conv.bias.normal_(0, 5)
    assert torch.all(enc(torch.randn(3, 100)) >= 0)


def test_codec_gradient_matches_finite_differences():
    torch.manual_seed(0)
    enc, dec = Encoder(4, 3).double(), Decoder(4, 3).double()
    x = torch.randn(2, 20, dtype=torch.float64)
    target = torch.randn(2, 20, dtype=torch.float64)

    def loss():
        return ((dec(enc(x)) - target) ** 2).sum()

    params = [enc.conv.weight, dec.deconv.weight]
    grads = torch.autograd.grad(loss(), params)
    eps = 1e-6
    for p, g in zip(params, grads):
        flat = p.data.view(-1)
        for i in range(flat.numel()):
            old = flat[i].item()
            flat[i] = old + eps
            up = loss().item()
            flat[i] = old - eps
            down = loss().item()
            flat[i] = old
            fd = (up - down) / (2 * eps)
            an = g.view(-1)[i].item()
            assert abs(fd - an) <= 1e-3 * max(abs(fd), abs(an)) + 1e-7
