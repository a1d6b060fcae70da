"""Two-phase training loop, segment dataset and checkpoints."""

import logging
import math
import os
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
import torch

from .config import ModelConfig, TrainConfig, flatten, split_config
from .errors import InvalidConfigError, InvalidInputError
from .forge.dataset import Manifest, load_manifest
from .frontend import aligned_length
from .metrics import rasterize_activity
from .model import ADCSS, build_model

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "adcss-checkpoint"
CHECKPOINT_VERSION = 1


def device() -> torch.device:
    return torch.device(os.environ.get("ADCSS_DEVICE", "cpu"))


@dataclass
class Segment:
    record: int
    start: int
    end: int
    speakers: tuple[int, ...]


@dataclass
class Example:
    id: str
    mixture: torch.Tensor  # (n,)
    refs: torch.Tensor  # (C, n)
    labels: torch.Tensor  # (C, T)

    @property
    def num_speakers(self) -> int:
        return self.refs.shape[0]


class SegmentDataset:
    """Mixtures cut into fixed-length segments.

    A trailing piece shorter than half a segment is merged into the previous
    segment. Speakers silent throughout a segment are dropped from it, and
    segments with no active speaker are skipped.
    """

    def __init__(self, manifest: Manifest, segment_seconds: float, L: int, sample_rate: int = 16000,
                 cache_size: int = 4096):
        self.manifest = manifest
        self.L = L
        self.sample_rate = sample_rate
        self._load = lru_cache(maxsize=cache_size)(self._load_record)
        seg = int(round(segment_seconds * sample_rate))
        if seg < L:
            raise InvalidConfigError(f"segment of {seg} samples is shorter than the kernel ({L})")
        self.segments: list[Segment] = []
        for i, rec in enumerate(manifest.records):
            n = int(rec["num_samples"])
            bounds = list(range(0, n, seg)) + [n]
            if len(bounds) > 2 and bounds[-1] - bounds[-2] < seg // 2:
                del bounds[-2]
            for start, end in zip(bounds[:-1], bounds[1:]):
                if end - start < L:
                    continue
                active = tuple(c for c, spans in enumerate(rec["intervals"])
                               if any(s * sample_rate < end and e * sample_rate > start for s, e in spans))
                if active:
                    self.segments.append(Segment(i, start, end, active))

    def _load_record(self, index: int):
        return self.manifest.load_audio(self.manifest.records[index])

    def __len__(self) -> int:
        return len(self.segments)

    def __getitem__(self, idx: int) -> Example:
        seg = self.segments[idx]
        rec = self.manifest.records[seg.record]
        mixture, sources, _ = self._load(seg.record)
        sl = slice(seg.start, seg.end)
        refs = np.stack([sources[c][sl] for c in seg.speakers])
        keep = [k for k in range(len(refs)) if np.any(refs[k])]
        if not keep:
            keep = list(range(len(refs)))
        offset = seg.start / self.sample_rate
        intervals = [[(s - offset, e - offset) for s, e in rec["intervals"][seg.speakers[k]]] for k in keep]
        n = seg.end - seg.start
        labels = rasterize_activity(intervals, aligned_length(n, self.L), self.L, self.sample_rate)
        return Example(f"{rec['id']}@{seg.start}", torch.from_numpy(np.array(mixture[sl])),
                       torch.from_numpy(refs[keep]), torch.from_numpy(labels).float())


@dataclass
class TrainState:
    phase: int = 1
    seed: int = 0
    epoch: int = 0
    step_in_epoch: int = 0
    global_step: int = 0
    best_valid: float = math.inf
    bad_epochs: int = 0
    stopped: bool = False
    epoch_losses: list[float] = field(default_factory=list)
    valid_losses: list[float] = field(default_factory=list)
    step_losses: list[float] = field(default_factory=list)
    running: list[float] = field(default_factory=list)  # losses of the current epoch


def save_checkpoint(path, model: ADCSS, optimizer, state: TrainState, train_cfg: TrainConfig | None = None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": flatten(model.cfg, train_cfg or TrainConfig()),
        "model": model.state_dict(),
        "optimizer": optimizer.state_dict() if optimizer is not None else None,
        "rng": {"torch": torch.get_rng_state(), "numpy": np.random.get_state()},
        "state": asdict(state),
    }
    tmp = path.with_suffix(path.suffix + ".tmp")
    torch.save(payload, tmp)
    os.replace(tmp, path)


def load_checkpoint(path):
    """Return (model, payload); the model is rebuilt from the stored config."""
    try:
        payload = torch.load(path, map_location="cpu", weights_only=False)
    except (OSError, RuntimeError) as exc:
        raise InvalidInputError(f"cannot load checkpoint {path}: {exc}") from exc
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise InvalidInputError(f"{path} is not an adcss checkpoint")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise InvalidInputError(f"{path}: unsupported checkpoint version {payload.get('version')}")
    flat = {k: v for k, v in payload["config"].items()}
    model_cfg, _, _ = split_config(flat)
    model = build_model(model_cfg)
    model.load_state_dict(payload["model"])
    return model, payload


def _batch_loss(model: ADCSS, examples: list[Example]):
    dev = next(model.parameters()).device
    total = 0.0
    for ex in examples:
        out = model.forward_train(ex.mixture.to(dev), ex.num_speakers)
        loss, _ = model.loss(out, ex.refs.to(dev), ex.labels.to(dev))
        total = total + loss
    return total / len(examples)


def prepare_example(ex: Example, model_cfg: ModelConfig) -> Example | None:
    """Drop speakers the model cannot handle in this configuration."""
    if model_cfg.attractor_style == "none" and ex.num_speakers != model_cfg.fixed_speakers:
        return None
    if ex.num_speakers > model_cfg.J_max:
        return None
    return ex


@torch.no_grad()
def validation_loss(model: ADCSS, data: SegmentDataset) -> float:
    model.eval()
    losses = []
    for i in range(len(data)):
        ex = prepare_example(data[i], model.cfg)
        if ex is None:
            continue
        losses.append(float(_batch_loss(model, [ex])))
    model.train()
    return float(np.mean(losses)) if losses else math.inf


class Trainer:
    """Owns the model, optimizer and TrainState for one training phase."""

    def __init__(self, model: ADCSS, train_cfg: TrainConfig, phase: int, train_data: SegmentDataset,
                 valid_data: SegmentDataset | None, out_dir=None, state: TrainState | None = None):
        if phase not in (1, 2):
            raise InvalidConfigError(f"phase must be 1 or 2, got {phase}")
        self.model = model.to(device())
        self.cfg = train_cfg
        self.phase = phase
        self.train_data = train_data
        self.valid_data = valid_data
        self.out_dir = Path(out_dir) if out_dir is not None else None
        self.optimizer = torch.optim.Adam(model.parameters(), lr=train_cfg.lr(phase))
        self.state = state or TrainState(phase=phase, seed=train_cfg.seed)
        if len(train_data) == 0:
            raise InvalidInputError("training set has no usable segments")

    def epoch_order(self, epoch: int) -> list[int]:
        rng = np.random.default_rng([self.state.seed, self.phase, epoch])
        order = rng.permutation(len(self.train_data)).tolist()
        if self.cfg.steps_per_epoch is not None:
            needed = self.cfg.steps_per_epoch * self.cfg.batch_size
            reps = math.ceil(needed / len(order))
            order = (order * reps)[:needed]
        return order

    def step(self, examples: list[Example]) -> float:
        torch.manual_seed(self.state.seed * 1_000_003 + self.state.global_step)
        self.optimizer.zero_grad()
        loss = _batch_loss(self.model, examples)
        loss.backward()
        if self.cfg.grad_clip:
            torch.nn.utils.clip_grad_norm_(self.model.parameters(), self.cfg.grad_clip)
        self.optimizer.step()
        self.state.global_step += 1
        return float(loss)

    def run_epoch(self, max_steps: int | None = None) -> bool:
        """Advance the current epoch; return True when it completed."""
        st = self.state
        order = self.epoch_order(st.epoch)
        bs = self.cfg.batch_size
        n_batches = math.ceil(len(order) / bs)
        done = 0
        while st.step_in_epoch < n_batches:
            if max_steps is not None and done >= max_steps:
                return False
            idx = order[st.step_in_epoch * bs:(st.step_in_epoch + 1) * bs]
            examples = [ex for ex in (prepare_example(self.train_data[i], self.model.cfg) for i in idx) if ex]
            st.step_in_epoch += 1
            done += 1
            if not examples:
                continue
            loss = self.step(examples)
            st.step_losses.append(loss)
            st.running.append(loss)
        st.epoch_losses.append(float(np.mean(st.running)) if st.running else math.nan)
        st.running = []
        st.epoch += 1
        st.step_in_epoch = 0
        self.end_of_epoch()
        return True

    def end_of_epoch(self):
        st = self.state
        if self.valid_data is not None:
            v = validation_loss(self.model, self.valid_data)
            st.valid_losses.append(v)
            if v < st.best_valid:
                st.best_valid = v
                st.bad_epochs = 0
                self.save("best.pt")
            else:
                st.bad_epochs += 1
                if st.bad_epochs >= self.cfg.patience:
                    st.stopped = True
            log.info("phase %d epoch %d: train %.4f valid %.4f", self.phase, st.epoch,
                     st.epoch_losses[-1], v)
        self.save("last.pt")

    def save(self, name: str):
        if self.out_dir is not None:
            save_checkpoint(self.out_dir / name, self.model, self.optimizer, self.state, self.cfg)

    def fit(self, max_steps: int | None = None) -> TrainState:
        """Train until max_epochs, early stopping, or ``max_steps`` optimizer steps."""
        start = self.state.global_step
        while not self.state.stopped and self.state.epoch < self.cfg.max_epochs:
            budget = None if max_steps is None else max_steps - (self.state.global_step - start)
            if budget is not None and budget <= 0:
                break
            if not self.run_epoch(budget):
                break
        # also covers a stop in the middle of an epoch
        self.save("last.pt")
        return self.state

    @classmethod
    def resume(cls, path, train_cfg: TrainConfig, train_data, valid_data, out_dir=None) -> "Trainer":
        model, payload = load_checkpoint(path)
        state = TrainState(**payload["state"])
        trainer = cls(model, train_cfg, state.phase, train_data, valid_data, out_dir, state)
        if payload.get("optimizer") is not None:
            trainer.optimizer.load_state_dict(payload["optimizer"])
            for group in trainer.optimizer.param_groups:
                group["lr"] = train_cfg.lr(state.phase)
        torch.set_rng_state(payload["rng"]["torch"])
        np.random.set_state(payload["rng"]["numpy"])
        return trainer


def train(model_cfg: ModelConfig, train_cfg: TrainConfig, phase: int, resume=None,
          max_steps: int | None = None) -> Trainer:
    """Run one training phase from the manifests named in ``train_cfg``.

    Phase 2 starts from ``init_checkpoint`` or, failing that, the phase-1 best
    checkpoint under ``ckpt_dir``.
    """
    torch.use_deterministic_algorithms(True)
    train_path, valid_path = train_cfg.manifests(phase)
    train_data = SegmentDataset(load_manifest(train_path), train_cfg.segment_seconds, model_cfg.L,
                                model_cfg.sample_rate)
    valid_data = SegmentDataset(load_manifest(valid_path), train_cfg.segment_seconds, model_cfg.L,
                                model_cfg.sample_rate)
    out_dir = Path(train_cfg.ckpt_dir) / f"phase{phase}"
    if resume is not None:
        trainer = Trainer.resume(resume, train_cfg, train_data, valid_data, out_dir)
    else:
        init = train_cfg.init_checkpoint
        if init is None and phase == 2:
            candidate = Path(train_cfg.ckpt_dir) / "phase1" / "best.pt"
            init = str(candidate) if candidate.exists() else None
        if init is not None:
            model, _ = load_checkpoint(init)
        else:
            model = build_model(model_cfg, train_cfg.seed)
        trainer = Trainer(model, train_cfg, phase, train_data, valid_data, out_dir)
    trainer.fit(max_steps)
    return trainer
