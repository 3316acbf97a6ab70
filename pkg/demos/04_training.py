"""Train a small parallel decoder end to end on the unimodal task.

The model predicts all positions at once from an upsampled copy of the
source, learns through the alignment loss, and glances at the target
early in training.  On the deterministic single-mode task a few hundred
steps are enough to decode most held-out sentences exactly.
"""

import numpy as np

from natkit.analysis import adjacent_repetition_rate
from natkit.corpus import synth_task, synth_vocab
from natkit.model import ModelConfig, decode
from natkit.training import TrainConfig, train_model


def main():
    vocab = synth_vocab(20)
    train = synth_task(600, (3, 8), 1, seed=11, n_words=20)
    held = synth_task(100, (3, 8), 1, seed=12, n_words=20)

    config = ModelConfig(
        vocab_size=len(vocab),
        d_model=48,
        enc_layers=2,
        dec_layers=2,
        decoder_input="uniform_copy",
        upsample=3,
        max_len=48,
    )
    hyper = TrainConfig(
        steps=1200,
        batch_size=16,
        lr=5e-3,
        warmup=100,
        eval_every=200,
        keep_best=5,
        seed=3,
        glat_start=0.5,
    )

    print(f"training {config.dec_layers}-layer parallel decoder, "
          f"{hyper.steps} steps, glancing from {hyper.glat_start} ...")
    result = train_model(train, config, hyper, heldout=held.pairs)
    print(f"final heldout loss {result.val_history[-1][1]:.4f}, "
          f"averaged {result.n_averaged} snapshots")
    print()

    hyps = []
    exact = 0
    for src, tgt in held.pairs:
        hyp = decode(result.params, config, src.ids)
        hyps.append(hyp)
        exact += int(hyp == tgt.ids)
    print(f"held-out exact match: {exact}/{len(held.pairs)}")
    print(f"adjacent repetition rate: {adjacent_repetition_rate(hyps):.4f}")
    print()

    print("sample decodes:")
    for src, tgt in held.pairs[:4]:
        hyp = decode(result.params, config, src.ids)
        mark = "=" if hyp == tgt.ids else "!"
        print(f"  {mark} {' '.join(vocab.decode(src.ids))}")
        print(f"      -> {' '.join(vocab.decode(hyp))}")


if __name__ == "__main__":
    main()
