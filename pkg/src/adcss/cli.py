"""Command-line entry point: ``adcss {synth,train,eval,infer}``."""

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np
import torch

from .audio import read_wav, write_wav
from .config import load_config
from .errors import InvalidConfigError, InvalidInputError, SamplingError
from .evaluation import evaluate_model
from .forge.dataset import build_dataset
from .training import device, load_checkpoint, train

log = logging.getLogger("adcss")


def cmd_synth(args) -> int:
    _, _, synth_cfg = load_config(args.config)
    paths = build_dataset(synth_cfg, args.out)
    for split, path in paths.items():
        print(f"{split}: {path}")
    return 0


def cmd_train(args) -> int:
    model_cfg, train_cfg, _ = load_config(args.config)
    trainer = train(model_cfg, train_cfg, args.phase, resume=args.resume, max_steps=args.max_steps)
    st = trainer.state
    print(json.dumps({"phase": st.phase, "epochs": st.epoch, "steps": st.global_step,
                      "best_valid": st.best_valid, "stopped_early": st.stopped}))
    return 0


def cmd_eval(args) -> int:
    model, _ = load_checkpoint(args.ckpt)
    model.to(device())
    report = evaluate_model(model, args.manifest, limit=args.limit)
    report.write(args.report)
    print(json.dumps(report.summary()))
    return 0


def cmd_infer(args) -> int:
    model, _ = load_checkpoint(args.ckpt)
    model.to(device()).eval()
    wav = read_wav(args.wav, model.cfg.sample_rate)
    out = model.infer(torch.from_numpy(wav).to(device()))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for j, est in enumerate(out.estimates.cpu().numpy()):
        write_wav(out_dir / f"s{j + 1}.wav", est, model.cfg.sample_rate)
    frame_hop = model.cfg.L // 2 / model.cfg.sample_rate
    result = {
        "count": out.count,
        "existence": None if out.existence is None else out.existence.cpu().tolist(),
        "frame_hop_seconds": frame_hop,
        "activity": out.activity.cpu().numpy().astype(np.int64).tolist(),
        "warning": out.warning,
    }
    (out_dir / "result.json").write_text(json.dumps(result))
    print(json.dumps({"count": out.count, "out": str(out_dir), "warning": out.warning}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adcss", description="Joint diarization, counting and separation.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a mixture dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="run one training phase")
    p.add_argument("--config", required=True)
    p.add_argument("--phase", type=int, choices=(1, 2), required=True)
    p.add_argument("--resume")
    p.add_argument("--max-steps", type=int, help="stop after this many optimizer steps")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a checkpoint on a manifest")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--limit", type=int)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("infer", help="count, diarize and separate one WAV file")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--wav", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_infer)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InvalidConfigError, InvalidInputError, SamplingError) as exc:
        print(f"adcss: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
