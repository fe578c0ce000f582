"""Alphabets, framing, one-hot encoding, FASTA input and synthetic corpora."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

AMINO_ACIDS = "ACDEFGHIKLMNPQRSTVWY"
START = "^"
END = "$"


class Alphabet:
    """Residue symbols followed by the start and end framing symbols."""

    def __init__(self, residues: str = AMINO_ACIDS):
        if not residues:
            raise ValueError("alphabet needs at least one residue")
        if len(set(residues)) != len(residues):
            raise ValueError(f"duplicate residues in {residues!r}")
        if START in residues or END in residues or ">" in residues or any(c.isspace() for c in residues):
            raise ValueError(f"residues may not contain framing, '>' or whitespace: {residues!r}")
        self.residues = residues
        self.symbols = residues + START + END
        self.index = {s: i for i, s in enumerate(self.symbols)}

    @property
    def size(self) -> int:
        return len(self.symbols)

    def __len__(self):
        return self.size

    def __eq__(self, other):
        return isinstance(other, Alphabet) and other.symbols == self.symbols

    def __repr__(self):
        return f"Alphabet({self.residues!r})"

    def validate(self, residues: str, record_id: str = "?"):
        bad = sorted(set(residues) - set(self.residues))
        if bad:
            raise ValueError(f"record {record_id}: unknown residues {''.join(bad)!r}")


@dataclass(frozen=True)
class SequenceRecord:
    id: str
    residues: str


def framed_length(records) -> int:
    """Length of the longest record after adding the start and end symbols."""
    return max((len(r.residues) for r in records), default=0) + 2


def frame(residues: str, length: int) -> str:
    return START + residues + END * (length - 1 - len(residues))


def frame_and_encode(records, length: int, alphabet: Alphabet) -> np.ndarray:
    """One-hot encode ``^ + residues + $...`` padded to ``length``.

    Returns a float array of shape (len(records), length, alphabet.size).
    """
    out = np.zeros((len(records), length, alphabet.size))
    for i, rec in enumerate(records):
        if len(rec.residues) > length - 2:
            raise ValueError(
                f"record {rec.id}: {len(rec.residues)} residues do not fit framed length {length}"
            )
        alphabet.validate(rec.residues, rec.id)
        idx = [alphabet.index[s] for s in frame(rec.residues, length)]
        out[i, np.arange(length), idx] = 1.0
    return out


def decode(batch, alphabet: Alphabet) -> list[str]:
    """Argmax decode; drop a leading start symbol and cut at the first end symbol."""
    batch = np.asarray(batch)
    if batch.ndim != 3 or batch.shape[2] != alphabet.size:
        raise ValueError(f"decode expects (batch, length, {alphabet.size}), got {batch.shape}")
    out = []
    for row in np.argmax(batch, axis=2):  # argmax keeps the lowest index on ties
        text = "".join(alphabet.symbols[i] for i in row)
        if text.startswith(START):
            text = text[1:]
        cut = text.find(END)
        out.append(text if cut < 0 else text[:cut])
    return out


# --------------------------------------------------------------------------
# FASTA


def read_fasta(path):
    """Yield ``(id, sequence)`` pairs; raises ValueError with a line number on bad input."""
    path = Path(path)
    records, current_id, chunks = [], None, []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith(">"):
                if current_id is not None:
                    records.append((current_id, "".join(chunks)))
                current_id = line[1:].split()[0] if line[1:].strip() else f"record{len(records) + 1}"
                chunks = []
            elif current_id is None:
                raise ValueError(f"{path}:{lineno}: sequence data before the first '>' header")
            elif any(c.isspace() for c in line) or ">" in line:
                raise ValueError(f"{path}:{lineno}: malformed sequence line")
            else:
                chunks.append(line)
    if current_id is not None:
        records.append((current_id, "".join(chunks)))
    return records


def write_fasta(path, sequences, prefix="seq"):
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for i, seq in enumerate(sequences):
            fh.write(f">{prefix}{i}\n{seq}\n")


def load_fasta(path, alphabet: Alphabet, length_filter=None, sample_n=None, rng=None):
    """Parse, validate, length-filter and optionally subsample FASTA records."""
    records = []
    for rid, seq in read_fasta(path):
        seq = seq.upper()
        if not seq:
            continue
        alphabet.validate(seq, rid)
        records.append(SequenceRecord(rid, seq))
    if length_filter is not None:
        lo, hi = length_filter
        records = [r for r in records if lo <= len(r.residues) <= hi]
    if sample_n is not None:
        if sample_n > len(records):
            raise ValueError(f"{path}: asked for {sample_n} records but only {len(records)} pass the filters")
        if rng is None:
            raise ValueError("subsampling needs a seeded generator")
        keep = np.sort(rng.choice(len(records), size=sample_n, replace=False))
        records = [records[i] for i in keep]
    return records


# --------------------------------------------------------------------------
# synthetic Markov corpus


def check_stochastic(transition, atol=1e-9) -> np.ndarray:
    t = np.asarray(transition, dtype=np.float64)
    if t.ndim != 2 or t.shape[0] != t.shape[1]:
        raise ValueError(f"transition matrix must be square, got shape {t.shape}")
    if np.any(t < 0) or not np.allclose(t.sum(axis=1), 1.0, rtol=0, atol=atol):
        raise ValueError("transition matrix rows must be nonnegative and sum to 1")
    return t


def stationary_distribution(transition) -> np.ndarray:
    t = check_stochastic(transition)
    vals, vecs = np.linalg.eig(t.T)
    v = np.real(vecs[:, np.argmin(np.abs(vals - 1))])
    return v / v.sum()


def synth_corpus(transition, residues: str, length, n: int, rng, start=None, prefix="syn"):
    """Sample ``n`` order-1 Markov sequences over ``residues``.

    ``length`` is an int (fixed) or an inclusive ``(lo, hi)`` range.  The first
    symbol is ``start`` (an index) if given, else drawn from the stationary
    distribution.
    """
    t = check_stochastic(transition)
    if t.shape[0] != len(residues):
        raise ValueError(f"transition is {t.shape[0]}x{t.shape[0]} but there are {len(residues)} residues")
    if n < 0:
        raise ValueError("n must be nonnegative")
    cumulative = np.cumsum(t, axis=1)
    cumulative[:, -1] = 1.0
    initial = np.cumsum(stationary_distribution(t))
    initial[-1] = 1.0
    records = []
    for i in range(n):
        size = length if np.isscalar(length) else int(rng.integers(length[0], length[1] + 1))
        if size < 1:
            raise ValueError("sequence length must be >= 1")
        u = rng.random(size)
        state = start if start is not None else int(np.searchsorted(initial, u[0], side="right"))
        states = [state]
        for r in u[1:]:
            state = int(np.searchsorted(cumulative[state], r, side="right"))
            states.append(state)
        records.append(SequenceRecord(f"{prefix}{i}", "".join(residues[s] for s in states)))
    return records


def default_toy_chain(residues: str = "ACGT", stay: float = 0.1, step: float = 0.7) -> np.ndarray:
    """Cyclic chain: mostly advance one symbol, sometimes stay, else jump uniformly."""
    u = len(residues)
    rest = (1.0 - stay - step) / max(u - 2, 1)
    t = np.full((u, u), rest)
    for i in range(u):
        t[i, i] = stay
        t[i, (i + 1) % u] = step
    return t / t.sum(axis=1, keepdims=True)


# --------------------------------------------------------------------------
# corpus cache and batching


def write_corpus(path, records):
    """One framed sequence per line: ``^residues$`` (no padding)."""
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(START + rec.residues + END + "\n")


def read_corpus(path, alphabet: Alphabet):
    records = []
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            if not (line.startswith(START) and line.endswith(END)) or len(line) < 2:
                raise ValueError(f"{path}:{lineno}: corpus line is not framed with '^' and '$'")
            residues = line[1:-1]
            alphabet.validate(residues, f"line {lineno}")
            records.append(SequenceRecord(f"line{lineno}", residues))
    return records


def iterate_batches(n: int, batch_size: int, rng):
    """Shuffled index batches; the order depends only on ``rng``'s state."""
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]
