"""Train the sequence WGAN on a synthetic Markov corpus and chart 3-mer KL per epoch.

Writes toy_wgan.svg next to the working directory.  About twenty epochs are enough to
see KL fall; the acceptance suite runs the longer version.
"""

import sys

import numpy as np

from momentwgan.data import Alphabet, default_toy_chain, synth_corpus
from momentwgan.plot import line_chart
from momentwgan.train import TrainConfig, Trainer

epochs = int(sys.argv[1]) if len(sys.argv) > 1 else 20

alphabet = Alphabet("ACGT")
corpus = synth_corpus(default_toy_chain("ACGT"), "ACGT", 30, 5000, np.random.default_rng(0))
print("first record", corpus[0].residues)

series = []
for m in (1, 2):
    # tau and beta1 are loosened from the library defaults so this small problem learns quickly
    config = TrainConfig(epochs=epochs, m=m, seed=2, tau=0.1, beta1=0.5, eval_k=3, eval_sample_count=500)
    history = Trainer(config, corpus, alphabet).fit(
        on_epoch=lambda trainer, rec: print(f"m={m} epoch {rec.epoch}: KL {rec.kl:.3f}"))
    series.append((f"m={m}", [r.epoch for r in history], [r.kl for r in history]))

with open("toy_wgan.svg", "w") as fh:
    fh.write(line_chart(series, title="3-mer KL on the toy corpus"))
print("wrote toy_wgan.svg")
