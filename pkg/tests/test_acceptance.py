"""Acceptance suite: one check per criterion, each printing a PASS/FAIL line.

The lines are collected into an "acceptance summary" section at the end of
the pytest report; ``-s`` also shows each one as its check finishes.
"""

import itertools
import time

import numpy as np
import torch
from scipy.optimize import linear_sum_assignment

from adcss.attractor import DiarizationHead, FiLM
from adcss.forge import SynthConfig, generate_mixture, sample_room
from adcss.forge.dataset import make_corpus, make_noise, mixture_rng
from adcss.frontend import chunk, overlap_add
from adcss.metrics import der
from adcss.objectives import pit_diar_loss, pit_si_sdr_loss, si_sdr
from adcss.separator import Separator
from helpers import finite_difference_check, random_example, relative_error, tiny_model
from oracles import brute_force_der, brute_force_pit, np_bce, np_si_sdr
from toy_run import ablation_results, toy_results

RESULTS = []


def report(name, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def test_chunk_overlap_add_round_trip():
    rng = np.random.default_rng(0)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(200):
        T = int(rng.integers(1, 400))
        K = 2 * int(rng.integers(1, 64))
        x = torch.from_numpy(rng.standard_normal((T, 16)))
        y = overlap_add(chunk(x, K))
        worst = max(worst, float((y - x).norm() / x.norm()))
    elapsed = time.perf_counter() - start
    report("chunk/overlap-add round trip", worst <= 1e-6 and elapsed < 10,
           f"max rel err {worst:.2e} over 200 cases in {elapsed:.2f} s")


def test_si_sdr_properties():
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(100):
        ref = torch.from_numpy(rng.standard_normal(1000))
        est = ref + torch.from_numpy(rng.standard_normal(1000)) * rng.uniform(0.1, 3)
        base = si_sdr(est, ref).item()
        for s in (0.5, 2.0, 10.0):
            worst = max(worst, abs(si_sdr(s * est, ref).item() - base), abs(si_sdr(est, s * ref).item() - base))
    x = torch.from_numpy(rng.standard_normal(1000))
    ceiling = si_sdr(x, x).item()
    floor = si_sdr(torch.tensor([1.0, 1.0, -1.0, -1.0]), torch.tensor([1.0, -1.0, 1.0, -1.0])).item()
    report("SI-SDR properties", worst <= 1e-4 and ceiling == 30.0 and floor == -30.0,
           f"max scale deviation {worst:.2e} dB, si_sdr(x,x)={ceiling}, orthogonal={floor}")


def test_pit_oracle_equivalence():
    rng = np.random.default_rng(2)
    start = time.perf_counter()
    mismatches = 0
    for k in range(100):
        C = (2, 3, 4)[k % 3]
        refs = rng.standard_normal((C, 256))
        ests = refs[rng.permutation(C)] * rng.uniform(0.5, 2) + rng.standard_normal((C, 256)) * rng.uniform(0.2, 3)
        loss, perm = pit_si_sdr_loss(torch.from_numpy(ests), torch.from_numpy(refs))
        cost = np.array([[-np_si_sdr(ests[i], refs[j]) for j in range(C)] for i in range(C)])
        best, best_perm = brute_force_pit(cost)
        rows, cols = linear_sum_assignment(cost)
        solver = tuple(int(rows[list(cols).index(c)]) for c in range(C))
        if perm.mapping != best_perm or perm.mapping != solver or abs(loss.item() - best / C) > 1e-9:
            mismatches += 1

        T = int(rng.integers(5, 40))
        labels = (rng.random((C, T)) < 0.5).astype(np.float64)
        probs = np.clip(labels[rng.permutation(C)] * 0.6 + rng.random((C, T)) * 0.4, 0.01, 0.99)
        dloss, dperm = pit_diar_loss(torch.from_numpy(probs), torch.from_numpy(labels))
        dcost = np.array([[np_bce(labels[j], probs[i]).sum() for j in range(C)] for i in range(C)])
        dbest, dbest_perm = brute_force_pit(dcost)
        if dperm.mapping != dbest_perm or abs(dloss.item() - dbest / (C * T)) > 1e-9:
            mismatches += 1
    elapsed = time.perf_counter() - start
    report("PIT oracle equivalence", mismatches == 0 and elapsed < 30,
           f"{mismatches} mismatches over 100 separation + 100 diarization instances in {elapsed:.2f} s")


def test_der_oracle():
    rng = np.random.default_rng(3)
    mismatches = 0
    nonzero_self = 0
    for _ in range(100):
        C, H, T = int(rng.integers(1, 4)), int(rng.integers(1, 4)), int(rng.integers(1, 31))
        ref = (rng.random((C, T)) < 0.5).astype(np.int64)
        hyp = (rng.random((H, T)) < 0.5).astype(np.int64)
        if abs(der(ref, hyp) - brute_force_der(ref, hyp)) > 1e-12 and not (
                np.isinf(der(ref, hyp)) and np.isinf(brute_force_der(ref, hyp))):
            mismatches += 1
        if der(ref, ref) != 0.0:
            nonzero_self += 1
    report("DER oracle", mismatches == 0 and nonzero_self == 0,
           f"{mismatches} mismatches vs brute force, {nonzero_self} nonzero der(x, x) over 100 instances")


def test_gradient_check():
    start = time.perf_counter()
    model = tiny_model(seed=0)
    mixture, refs, labels = random_example(8000, 2, model.cfg.L, seed=0)

    def loss():
        total, _ = model.loss(model.forward_train(mixture, 2), refs, labels)
        return total

    checks = finite_difference_check(loss, list(model.named_parameters()), 60, np.random.default_rng(4))
    errors = [relative_error(a, f) for _, _, a, f in checks]
    elapsed = time.perf_counter() - start
    report("gradient check", len(checks) >= 50 and max(errors) <= 1e-3 and elapsed < 300,
           f"max rel err {max(errors):.2e} on {len(checks)} parameters in {elapsed:.1f} s")


def test_equivariance():
    torch.manual_seed(5)
    sep = Separator(F=16, D=16, num_heads=2, n_triple=2, L=16)
    ct = chunk(torch.randn(1, 40, 16), 8)
    t_in = ct.replace(torch.randn(1, 3, *ct.values.shape[1:]))
    worst_sep = 0.0
    worst_head = 0.0
    head, film = DiarizationHead(16), FiLM(16)
    a, d = torch.randn(1, 3, 16), torch.randn(1, 40, 16)
    for perm in itertools.permutations(range(3)):
        perm = list(perm)
        out = sep(t_in)
        out_p = sep(t_in.replace(t_in.values[:, perm]))
        worst_sep = max(worst_sep, float((out_p - out[:, perm]).abs().max()))
        diar = (head(a[:, perm], d) - head(a, d)[:, perm]).abs().max()
        fm = (film(ct.values, a[:, perm]) - film(ct.values, a)[:, perm]).abs().max()
        worst_head = max(worst_head, float(diar), float(fm))
    report("equivariance", worst_sep <= 1e-5 and worst_head <= 1e-5,
           f"separator max deviation {worst_sep:.2e}, attractor heads {worst_head:.2e}")


def test_synthesis_statistics():
    cfg = SynthConfig(condition="noisy_reverb", speaker_counts=(2, 3), toy_min_dur=0.1, toy_max_dur=0.2)
    corpus, noise = make_corpus(cfg).split("train"), make_noise(cfg).split("train")
    counts = np.zeros(6)
    silences, snr_err, sums_exact, rooms_ok = [], 0.0, True, True
    for i in range(1000):
        mix = generate_mixture(corpus, noise, cfg, mixture_rng(11, "train", i))
        mic = np.array(mix.meta["positions_m"]["mic"])
        for t, pos in zip(mix.tracks, mix.meta["positions_m"]["speakers"]):
            counts[len(t.intervals)] += 1
            # reverberation delays the whole track by the direct path
            prev = round(np.linalg.norm(np.array(pos) - mic) / 343.0 * 16000) / 16000
            for s, e in t.intervals:
                silences.append(s - prev)
                prev = e
        levels = [10 * np.log10(np.mean(t.waveform.astype(np.float64) ** 2)) for t in mix.tracks]
        measured = np.mean(levels) - 10 * np.log10(np.mean(mix.noise.astype(np.float64) ** 2))
        snr_err = max(snr_err, abs(measured - mix.meta["snr_db"]))
        acc = np.zeros_like(mix.mixture)
        for part in [t.waveform for t in mix.tracks] + [mix.noise]:
            acc = acc + part
        sums_exact &= bool(np.array_equal(acc, mix.mixture))
        dims = mix.meta["room_dims_m"]
        rooms_ok &= (4 <= dims[0] <= 8 and 4 <= dims[1] <= 8 and 3 <= dims[2] <= 4
                     and 0.2 <= mix.meta["rt60_s"] <= 0.6 and 0 <= mix.meta["snr_db"] <= 10)
    freqs = counts[1:] / counts.sum()
    geometry = all(not sample_room(np.random.default_rng([12, k]), 3).check() for k in range(1000))
    ok = (np.all(np.abs(freqs - 0.2) <= 0.02) and min(silences) >= -1e-9 and max(silences) <= 3.0 + 1e-9
          and snr_err <= 0.1 and sums_exact and rooms_ok and geometry)
    report("synthesis statistics", ok,
           f"utterance buckets {np.round(freqs, 3).tolist()}, silences in [{min(silences):.3f}, "
           f"{max(silences):.3f}] s, max SNR error {snr_err:.4f} dB, sum exact {sums_exact}, "
           f"room/RT60/SNR ranges {rooms_ok and geometry}")


def test_toy_training_run():
    res = toy_results()
    ok = (res["loss_drop"] >= 0.5 and res["delta_si_sdr"] >= 5.0 and res["sca"] >= 0.9
          and res["der"] <= 0.20 and res["minutes"] <= 30)
    report("toy training run", ok,
           f"loss drop {100 * res['loss_drop']:.1f}%, held-out dSI-SDR {res['delta_si_sdr']:.2f} dB, "
           f"SCA {res['sca']:.3f}, DER {res['der']:.3f}, {res['minutes']:.1f} min")


def test_ablation_structure():
    res = ablation_results()
    on_off = [("transformer", True, False), ("rnn", True, False)]
    directional = all(res[(s, on)] >= res[(s, off)] for s, on, off in on_off)
    ran = len(res) == 5
    detail = ", ".join(f"{s}/{'diar' if d else 'nodiar'}={v:.2f} dB" for (s, d), v in res.items())
    report("ablation structure", ran and directional, detail)


def test_determinism_and_resume(tmp_path):
    from toy_run import determinism_check
    identical, resumed = determinism_check(tmp_path)
    report("determinism and checkpoint resume", identical and resumed,
           f"fixed-seed runs bit-identical: {identical}, resume matches uninterrupted: {resumed}")
