"""k-mer distributions, KL against a background corpus, and rank correlation."""

import numpy as np

from momentwgan.data import default_toy_chain, synth_corpus
from momentwgan.evaluation import kl_divergence, kmer_distribution, spearman_rho

rng = np.random.default_rng(2)
chain = default_toy_chain("ACGT")
background = [r.residues for r in synth_corpus(chain, "ACGT", 30, 3000, rng)]
same = [r.residues for r in synth_corpus(chain, "ACGT", 30, 3000, rng)]
shuffled = ["".join(rng.permutation(list(s))) for s in same]
collapsed = ["ACGT" * 7 + "AC"] * 100

bg = kmer_distribution(background, 3)
print("distinct background 3-mers", len(bg))
for name, seqs in [("same chain", same), ("shuffled", shuffled), ("collapsed", collapsed)]:
    print(f"{name:>10}: KL = {kl_divergence(kmer_distribution(seqs, 3), bg):.4f}")

# a word the background never produced falls back to the pseudocount
print("all-G corpus:", kl_divergence(kmer_distribution(["GGGGGG"], 3), bg))

# Spearman rho only looks at ranks, so any monotone relation gives 1
losses = np.linspace(0.1, 2.0, 10)
print("rho(loss, exp(loss)) =", spearman_rho(losses, np.exp(losses)))
