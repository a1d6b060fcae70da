"""Small configurations shared by the unit and acceptance tests."""

import numpy as np
import torch

from adcss.config import ModelConfig
from adcss.model import build_model


def tiny_config(**overrides) -> ModelConfig:
    cfg = dict(L=16, F=8, D=8, K=4, num_heads=2, depth_dual=1, n_triple=1, J_max=3)
    cfg.update(overrides)
    return ModelConfig(**cfg)


def tiny_model(seed=0, dtype=torch.float64, **overrides):
    model = build_model(tiny_config(**overrides), seed)
    return model.to(dtype)


def random_example(n_samples, C, L, seed=0, dtype=torch.float64):
    """A random mixture with C references and random frame labels."""
    g = torch.Generator().manual_seed(seed)
    refs = torch.randn(C, n_samples, generator=g, dtype=dtype)
    mixture = refs.sum(0)
    T = (n_samples - L) // (L // 2) + 1
    labels = (torch.rand(C, T, generator=g) > 0.5).to(dtype)
    return mixture, refs, labels


def finite_difference_check(loss_fn, params, n_samples, rng: np.random.Generator, eps=1e-6):
    """Compare autograd with central differences on randomly drawn scalar parameters.

    Returns a list of (name, index, analytic, numeric).
    """
    named = [(n, p) for n, p in params if p.requires_grad]
    grads = torch.autograd.grad(loss_fn(), [p for _, p in named], allow_unused=True)
    sizes = np.array([p.numel() for _, p in named], dtype=np.float64)
    results = []
    picks = rng.choice(len(named), size=n_samples, p=sizes / sizes.sum())
    with torch.no_grad():
        for k in picks:
            name, p = named[k]
            i = int(rng.integers(p.numel()))
            flat = p.view(-1)
            old = flat[i].item()
            flat[i] = old + eps
            up = loss_fn().item()
            flat[i] = old - eps
            down = loss_fn().item()
            flat[i] = old
            g = grads[k]
            analytic = 0.0 if g is None else g.view(-1)[i].item()
            results.append((name, i, analytic, (up - down) / (2 * eps)))
    return results


def relative_error(a, b, floor=1e-6):
    return abs(a - b) / max(abs(a), abs(b), floor)
