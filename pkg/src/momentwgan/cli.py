"""Command-line entry point: ``momentwgan <command> ...``.

Commands: prepare, train, experiment, generate, eval, plot, emd-study.
Exit codes: 0 success, 1 runtime error, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import re
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import data as D
from .evaluation import DEFAULT_PSEUDOCOUNT, kl_divergence, kmer_distribution
from .nn import load_checkpoint, sample_noise
from .plot import line_chart
from .studies import critic_emd_study
from .train import (
    REFERENCE_TABLE, TrainConfig, Trainer, format_summary, read_metrics_csv, run_experiment,
    write_batch_csv, write_metrics_csv,
)

TRAIN_FLAGS = {
    # flag dest -> TrainConfig field
    "m": "m", "tau": "tau", "lr": "learning_rate", "batch": "batch_size", "epochs": "epochs",
    "seed": "seed", "k": "eval_k", "eval_samples": "eval_sample_count", "gen_every": "critic_steps_per_gen",
    "pseudocount": "pseudocount", "channels": "channels", "kernel": "kernel", "noise_dim": "noise_dim",
    "dropout": "dropout", "beta1": "beta1", "beta2": "beta2", "adam_eps": "epsilon", "dtype": "dtype",
}


class CommandError(Exception):
    pass


# --------------------------------------------------------------------------
# config files and manifests


def read_config(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CommandError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def content_hash(path) -> str:
    """Git blob hash of a file's bytes."""
    payload = Path(path).read_bytes()
    return hashlib.sha1(b"blob %d\0" % len(payload) + payload).hexdigest()


def write_manifest(path, entries: dict):
    lines = [f"{k} = {v}" for k, v in entries.items()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def manifest_path(corpus) -> Path:
    return Path(str(corpus) + ".manifest")


def corpus_alphabet(corpus, override=None) -> D.Alphabet:
    if override:
        return D.Alphabet(override)
    mpath = manifest_path(corpus)
    if mpath.exists():
        residues = read_config(mpath).get("alphabet")
        if residues:
            return D.Alphabet(residues)
    return D.Alphabet()


def load_sequences(path, alphabet=None):
    """Residue strings from a FASTA file or a framed corpus cache."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    first = text.lstrip()[:1]
    if first == ">":
        return [seq for _, seq in D.read_fasta(path)]
    if first == D.START:
        return [r.residues for r in D.read_corpus(path, alphabet or _permissive(text))]
    if not first:
        return []
    raise CommandError(f"{path}: neither FASTA nor a framed corpus")


def _permissive(text):
    return D.Alphabet("".join(sorted(set(text) - set("^$\n\r >"))) or "A")


def train_config(args) -> TrainConfig:
    values = read_config(args.config) if getattr(args, "config", None) else {}
    for flag, key in TRAIN_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            values[key] = value
    try:
        return TrainConfig.from_dict(values)
    except (TypeError, ValueError) as exc:
        raise CommandError(f"bad training configuration: {exc}") from None


# --------------------------------------------------------------------------
# commands


def cmd_prepare(args):
    rng = np.random.default_rng(args.seed)
    if args.fasta:
        alphabet = D.Alphabet(args.alphabet or D.AMINO_ACIDS)
        lo = args.min_len if args.min_len is not None else 1
        hi = args.max_len if args.max_len is not None else sys.maxsize
        records = D.load_fasta(args.fasta, alphabet, (lo, hi), args.sample_n, rng if args.sample_n else None)
        source = f"fasta:{args.fasta}"
    else:
        residues = args.alphabet or "ACGT"
        alphabet = D.Alphabet(residues)
        if args.transition:
            transition = [[float(v) for v in row.split(",")] for row in args.transition.split(";")]
        else:
            transition = D.default_toy_chain(residues)
        length = args.length if args.length_range is None else tuple(args.length_range)
        records = D.synth_corpus(transition, residues, length, args.n, rng)
        if args.sample_n is not None:
            if args.sample_n > len(records):
                raise CommandError(f"asked for {args.sample_n} records but only {len(records)} were generated")
            keep = np.sort(rng.choice(len(records), size=args.sample_n, replace=False))
            records = [records[i] for i in keep]
        source = f"synthetic:n={args.n},length={length}"
    if not records:
        raise CommandError("no records survived filtering")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    D.write_corpus(out, records)
    write_manifest(manifest_path(out), {
        "source": source, "alphabet": alphabet.residues, "records": len(records),
        "framed_length": D.framed_length(records), "seed": args.seed, "content_hash": content_hash(out),
    })
    print(f"wrote {len(records)} records to {out} (hash {content_hash(out)})")


def cmd_train(args):
    config = train_config(args)
    alphabet = corpus_alphabet(args.corpus, args.alphabet)
    records = D.read_corpus(args.corpus, alphabet)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    trainer = Trainer(config, records, alphabet)
    started = time.time()
    history = trainer.fit()
    write_metrics_csv(out / "metrics.csv", history, timing=args.timing)
    if args.batch_log:
        write_batch_csv(out / "batches.csv", trainer.batch_rows)
    trainer.save(out / "checkpoint.npz")
    write_manifest(out / "manifest.txt", {
        **{k: v for k, v in asdict(config).items()},
        "alphabet": alphabet.residues,
        "corpus": args.corpus,
        "corpus_hash": content_hash(args.corpus),
        "outputs": "metrics.csv checkpoint.npz" + (" batches.csv" if args.batch_log else ""),
        "started": time.strftime("%Y-%m-%dT%H:%M:%S", time.localtime(started)),
        "epoch_seconds": " ".join(f"{r.seconds:.3f}" for r in history),
    })
    if history:
        last = history[-1]
        print(f"epoch {last.epoch}: critic {last.critic_loss:.6g} gen {last.gen_loss:.6g} KL {last.kl:.4f}")
    print(f"wrote {out / 'metrics.csv'}")


def cmd_experiment(args):
    config = train_config(args)
    alphabet = corpus_alphabet(args.corpus, args.alphabet)
    records = D.read_corpus(args.corpus, alphabet)
    started = time.time()
    cells, summary = run_experiment(config, records, alphabet, args.seeds, args.ms, out_dir=args.out,
                                    jobs=args.jobs, timing=args.timing)
    write_manifest(Path(args.out) / "manifest.txt", {
        **{k: v for k, v in asdict(config).items() if k not in ("m", "seed")},
        "ms": " ".join(map(str, args.ms)),
        "seeds": " ".join(map(str, args.seeds)),
        "alphabet": alphabet.residues,
        "corpus": args.corpus,
        "corpus_hash": content_hash(args.corpus),
        "started": time.strftime("%Y-%m-%dT%H:%M:%S", time.localtime(started)),
        "cell_seconds": " ".join(f"m{c.m}/seed{c.seed}={c.runtime:.3f}" for c in cells),
    })
    print(format_summary(summary))
    print("\nfull-scale reference (antibody heavy chains, 200 epochs):")
    print(format_summary({m: REFERENCE_TABLE[m] for m in args.ms if m in REFERENCE_TABLE}))


def cmd_generate(args):
    try:
        _, generator, meta = load_checkpoint(args.checkpoint)
    except (ValueError, KeyError) as exc:
        raise CommandError(str(exc)) from None
    alphabet = D.Alphabet(meta["extra"].get("alphabet", D.AMINO_ACIDS))
    rng = np.random.default_rng(args.seed)
    sequences = []
    for start in range(0, args.n, 1000):
        b = min(1000, args.n - start)
        probs = generator(sample_noise(b, generator.config.noise_dim, rng)).value
        sequences.extend(D.decode(probs, alphabet))
    D.write_fasta(args.out, sequences, prefix="gen")
    print(f"wrote {len(sequences)} sequences to {args.out}")


def cmd_eval(args):
    generated = load_sequences(args.generated)
    background = load_sequences(args.background)
    if not generated or not background:
        raise CommandError("empty input: need generated and background sequences")
    fg, bg = kmer_distribution(generated, args.k), kmer_distribution(background, args.k)
    if fg.total == 0 or bg.total == 0:
        raise CommandError(f"no k-mers of length {args.k} in the inputs")
    kl = kl_divergence(fg, bg, args.pseudocount)
    print(f"KL = {kl:.6f} nats (k={args.k}, {fg.total} foreground / {bg.total} background k-mers)")
    if args.csv:
        path = Path(args.csv)
        new = not path.exists() or path.stat().st_size == 0
        with path.open("a", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            if new:
                writer.writerow(["generated", "background", "k", "pseudocount", "kl"])
            writer.writerow([args.generated, args.background, args.k, repr(args.pseudocount), repr(kl)])


def series_label(path) -> str:
    path = Path(path)
    manifest = path.parent / "manifest.txt"
    if manifest.exists():
        m = read_config(manifest).get("m")
        if m:
            return f"m={m}"
    match = re.search(r"(?:^|[^a-z])m=?(\d+)", str(path))
    return f"m={match.group(1)}" if match else path.stem


def cmd_plot(args):
    series = []
    for i, path in enumerate(args.csvs):
        try:
            records = read_metrics_csv(path)
        except ValueError as exc:
            raise CommandError(f"header mismatch: {exc}") from None
        label = args.labels[i] if args.labels and i < len(args.labels) else series_label(path)
        series.append((label, [r.epoch for r in records], [r.kl for r in records]))
    Path(args.out).write_text(line_chart(series), encoding="utf-8")
    print(f"wrote {args.out}")


def cmd_emd_study(args):
    rows, rho = critic_emd_study(args.deltas, n=args.n, tau=args.tau, steps=args.steps, seed=args.seed)
    print(f"{'delta':>6} {'emd':>10} {'critic gap':>12}")
    for r in rows:
        print(f"{r.delta:>6g} {r.emd:>10.4f} {r.gap:>12.4e}")
    print(f"spearman rho(gap, emd) = {rho:.4f}")


# --------------------------------------------------------------------------
# parser


def _add_train_flags(p):
    p.add_argument("corpus", help="framed corpus cache written by 'prepare'")
    p.add_argument("--config", help="key = value file; flags take precedence")
    p.add_argument("--alphabet", help="residue symbols (default: from the corpus manifest)")
    p.add_argument("--m", type=int, help="number of moments in the generator loss")
    p.add_argument("--tau", type=float, help="critic clip bound")
    p.add_argument("--lr", type=float)
    p.add_argument("--batch", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--k", type=int, help="k-mer size for the per-epoch KL")
    p.add_argument("--eval-samples", type=int)
    p.add_argument("--gen-every", type=int, help="train the generator on 1 in N batches")
    p.add_argument("--pseudocount", type=float)
    p.add_argument("--channels", type=int)
    p.add_argument("--kernel", type=int)
    p.add_argument("--noise-dim", type=int)
    p.add_argument("--dropout", type=float)
    p.add_argument("--beta1", type=float)
    p.add_argument("--beta2", type=float)
    p.add_argument("--adam-eps", type=float)
    p.add_argument("--dtype", choices=["float64", "float32"])
    p.add_argument("--timing", action="store_true", help="write wall-clock seconds into the CSV outputs")
    p.add_argument("--out", required=True)


def build_parser():
    parser = argparse.ArgumentParser(prog="momentwgan", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="build a framed corpus cache")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--fasta")
    src.add_argument("--synthetic", action="store_true")
    p.add_argument("--alphabet")
    p.add_argument("--transition", help="rows separated by ';', entries by ','")
    p.add_argument("--length", type=int, default=30)
    p.add_argument("--length-range", type=int, nargs=2, metavar=("MIN", "MAX"))
    p.add_argument("--n", type=int, default=5000)
    p.add_argument("--min-len", type=int)
    p.add_argument("--max-len", type=int)
    p.add_argument("--sample-n", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="train one WGAN")
    _add_train_flags(p)
    p.add_argument("--batch-log", action="store_true", help="also write batches.csv")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("experiment", help="replicate grid over seeds and m")
    _add_train_flags(p)
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    p.add_argument("--ms", type=int, nargs="+", default=[1, 2, 3, 4])
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("generate", help="sample sequences from a checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("eval", help="k-mer KL of generated sequences against a background")
    p.add_argument("generated")
    p.add_argument("background")
    p.add_argument("--k", type=int, default=6)
    p.add_argument("--pseudocount", type=float, default=DEFAULT_PSEUDOCOUNT)
    p.add_argument("--csv")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("plot", help="SVG of KL against epoch")
    p.add_argument("csvs", nargs="+")
    p.add_argument("--labels", nargs="+")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("emd-study", help="critic gap vs exact 1-D EMD on shifted Gaussians")
    p.add_argument("--deltas", type=float, nargs="+", default=[0.5, 1.0, 2.0, 4.0])
    p.add_argument("--n", type=int, default=512)
    p.add_argument("--tau", type=float, default=0.01)
    p.add_argument("--steps", type=int, default=300)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_emd_study)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    for name in ("n", "sample_n"):
        value = getattr(args, name, None)
        if value is not None and value < 0:
            parser.error(f"--{name.replace('_', '-')} must be nonnegative")
    try:
        args.func(args)
    except (CommandError, ValueError, OSError, KeyError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
