"""Deterministic WGAN training with the higher-moment generator loss."""

from __future__ import annotations

import csv
import logging
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .data import Alphabet, decode, frame_and_encode, framed_length, iterate_batches
from .evaluation import DEFAULT_PSEUDOCOUNT, kl_divergence, kmer_distribution, spearman_rho
from .loss import clip_params, critic_loss, generator_loss, signed_first_moment
from .nn import CriticNet, GeneratorNet, NetConfig, sample_noise, save_checkpoint

log = logging.getLogger(__name__)

METRICS_HEADER = ["epoch", "critic_loss", "gen_loss", "kl", "max_f", "seconds"]
BATCH_HEADER = ["epoch", "batch", "critic_loss", "gen_loss", "gen_updated"]
LIPSCHITZ_WARN = 0.5


@dataclass
class TrainConfig:
    epochs: int = 200
    batch_size: int = 128
    learning_rate: float = 0.001
    m: int = 1
    tau: float = 0.01
    critic_steps_per_gen: int = 5
    seed: int = 0
    eval_sample_count: int = 1000
    eval_k: int = 6
    pseudocount: float = DEFAULT_PSEUDOCOUNT
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    channels: int = 32
    kernel: int = 5
    noise_dim: int = 64
    dropout: float = 0.1
    dtype: str = "float64"

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        for name in ("batch_size", "critic_steps_per_gen", "eval_sample_count", "eval_k", "m"):
            if int(getattr(self, name)) != getattr(self, name) or getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")
        for name in ("learning_rate", "tau", "pseudocount", "epsilon"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("Adam betas must lie in [0, 1)")

    @classmethod
    def from_dict(cls, values: dict) -> "TrainConfig":
        known = {f.name: f.type for f in fields(cls)}
        unknown = set(values) - set(known)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        defaults = cls()
        out = {}
        for key, value in values.items():
            kind = type(getattr(defaults, key))
            out[key] = kind(value) if not isinstance(value, kind) else value
        return cls(**out)


@dataclass
class EpochRecord:
    epoch: int
    critic_loss: float
    gen_loss: float
    kl: float
    max_f: float
    seconds: float = field(default=0.0, compare=False)


class TrainingDiverged(RuntimeError):
    def __init__(self, message, snapshot):
        super().__init__(f"{message}; snapshot={snapshot}")
        self.snapshot = snapshot


# --------------------------------------------------------------------------
# Adam


def adam_step(value, grad, m, v, t, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam update; returns ``(value, m, v)`` as new arrays."""
    if value.shape != grad.shape:
        raise ValueError(f"adam_step: parameter shape {value.shape} != gradient shape {grad.shape}")
    if t < 1:
        raise ValueError("adam_step: t counts from 1")
    m = beta1 * m + (1 - beta1) * grad
    v = beta2 * v + (1 - beta2) * grad * grad
    m_hat = m / (1 - beta1 ** t)
    v_hat = v / (1 - beta2 ** t)
    return value - lr * m_hat / (np.sqrt(v_hat) + eps), m, v


class Adam:
    def __init__(self, params, lr=0.001, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = [np.zeros_like(p.value) for p in params]
        self.v = [np.zeros_like(p.value) for p in params]

    def step(self):
        self.t += 1
        for i, p in enumerate(self.params):
            grad = p.grad if p.grad is not None else np.zeros_like(p.value)
            p.value, self.m[i], self.v[i] = adam_step(
                p.value, grad, self.m[i], self.v[i], self.t, self.lr, self.beta1, self.beta2, self.eps
            )

    def zero_grad(self):
        self.params.zero_grad()


# --------------------------------------------------------------------------
# training state


class Trainer:
    """Models, optimizers and seeded streams for one (seed, m) run.

    Separate generator streams are spawned for initialisation, data order,
    noise, dropout and evaluation so that each consumer is reproducible on its
    own.
    """

    def __init__(self, config: TrainConfig, records, alphabet: Alphabet, length=None):
        if not records:
            raise ValueError("training corpus is empty")
        self.config = config
        self.alphabet = alphabet
        self.length = length or framed_length(records)
        ad.set_default_dtype(config.dtype)
        self.data = frame_and_encode(records, self.length, alphabet).astype(config.dtype)
        streams = np.random.SeedSequence(config.seed).spawn(6)
        init_c, init_g, data, noise, drop, ev = (np.random.default_rng(s) for s in streams)
        self.data_rng, self.noise_rng, self.dropout_rng, self.eval_rng = data, noise, drop, ev
        self.net_config = NetConfig(
            length=self.length, alphabet_size=alphabet.size, channels=config.channels,
            kernel=config.kernel, noise_dim=config.noise_dim, dropout=config.dropout,
        )
        self.critic = CriticNet(self.net_config, init_c, tau=config.tau)
        self.generator = GeneratorNet(self.net_config, init_g)
        opt = dict(lr=config.learning_rate, beta1=config.beta1, beta2=config.beta2, eps=config.epsilon)
        self.critic_opt = Adam(self.critic.params, **opt)
        self.gen_opt = Adam(self.generator.params, **opt)
        self.background = kmer_distribution([r.residues for r in records], config.eval_k)
        self.epoch = 0
        self.history: list[EpochRecord] = []
        self.batch_rows: list[dict] = []
        self.gen_first_moment: list[tuple[float, float]] = []

    def _noise(self, b):
        return sample_noise(b, self.config.noise_dim, self.noise_rng)

    def critic_step(self, real):
        cfg = self.config
        fake = self.generator.forward(self._noise(len(real)), training=True, rng=self.dropout_rng).value
        self.critic.params.zero_grad()
        preds_real = self.critic.forward(real, training=True, rng=self.dropout_rng)
        preds_gen = self.critic.forward(fake, training=True, rng=self.dropout_rng)
        loss = critic_loss(preds_real, preds_gen)
        ad.backward(loss)
        self.critic_opt.step()
        clip_params(self.critic.params, cfg.tau)
        max_f = max(np.abs(preds_real.value).max(), np.abs(preds_gen.value).max())
        return loss.item(), float(max_f)

    def generator_step(self, real):
        cfg = self.config
        self.generator.params.zero_grad()
        fake = self.generator.forward(self._noise(len(real)), training=True, rng=self.dropout_rng)
        preds_gen = self.critic.forward(fake, training=True, rng=self.dropout_rng)
        if cfg.m > 1:
            preds_real = self.critic.forward(real, training=True, rng=self.dropout_rng).value
        else:
            preds_real = np.zeros(1)
        loss = generator_loss(preds_real, preds_gen, cfg.m)
        ad.backward(loss)
        self.gen_opt.step()
        self.critic.params.zero_grad()
        if cfg.m > 1:
            self.gen_first_moment.append((loss.item(), signed_first_moment(preds_real, preds_gen)))
        return loss.item()

    def sample(self, n, rng=None, chunk=1000):
        """Decode ``n`` sequences from the generator in evaluation mode."""
        rng = self.eval_rng if rng is None else rng
        out = []
        for start in range(0, n, chunk):
            b = min(chunk, n - start)
            probs = self.generator.forward(sample_noise(b, self.config.noise_dim, rng)).value
            out.extend(decode(probs, self.alphabet))
        return out

    def evaluate(self) -> float:
        cfg = self.config
        fg = kmer_distribution(self.sample(cfg.eval_sample_count), cfg.eval_k)
        if fg.total == 0:
            # nothing long enough to count: score as fully outside the background support
            return -math.log(cfg.pseudocount)
        return kl_divergence(fg, self.background, cfg.pseudocount)

    def train_epoch(self, on_batch=None) -> EpochRecord:
        """One pass over the shuffled corpus, then a KL evaluation.

        The critic trains on every batch; the generator on batches whose
        index within the epoch is a multiple of ``critic_steps_per_gen``.
        ``on_batch(trainer, batch_index)`` runs after each batch.
        """
        cfg = self.config
        self.epoch += 1
        started = time.perf_counter()
        critic_losses, gen_losses, max_f = [], [], 0.0
        for i, idx in enumerate(iterate_batches(len(self.data), cfg.batch_size, self.data_rng)):
            real = self.data[idx]
            try:
                c_loss, batch_max = self.critic_step(real)
                g_loss = self.generator_step(real) if i % cfg.critic_steps_per_gen == 0 else None
            except FloatingPointError as exc:
                raise TrainingDiverged(str(exc), self._snapshot(i)) from None
            if not math.isfinite(c_loss) or (g_loss is not None and not math.isfinite(g_loss)):
                raise TrainingDiverged("non-finite loss", self._snapshot(i))
            critic_losses.append(c_loss)
            max_f = max(max_f, batch_max)
            if g_loss is not None:
                gen_losses.append(g_loss)
            self.batch_rows.append({
                "epoch": self.epoch, "batch": i, "critic_loss": c_loss,
                "gen_loss": g_loss, "gen_updated": int(g_loss is not None),
            })
            if on_batch is not None:
                on_batch(self, i)
        if max_f > LIPSCHITZ_WARN:
            warnings.warn(
                f"epoch {self.epoch}: max |f| = {max_f:.3g} exceeds {LIPSCHITZ_WARN}; "
                "consider a smaller tau", RuntimeWarning, stacklevel=2,
            )
        kl = self.evaluate()
        record = EpochRecord(
            epoch=self.epoch,
            critic_loss=float(np.mean(critic_losses)),
            gen_loss=float(np.mean(gen_losses)) if gen_losses else math.nan,
            kl=kl,
            max_f=max_f,
            seconds=time.perf_counter() - started,
        )
        self.history.append(record)
        log.debug("epoch %d: %s", self.epoch, record)
        return record

    def _snapshot(self, batch):
        return {
            "epoch": self.epoch, "batch": batch,
            "critic_max_abs": self.critic.params.max_abs(),
            "generator_max_abs": self.generator.params.max_abs(),
        }

    def fit(self, epochs=None, on_epoch=None, on_batch=None):
        for _ in range(self.config.epochs if epochs is None else epochs):
            record = self.train_epoch(on_batch=on_batch)
            if on_epoch is not None:
                on_epoch(self, record)
        return self.history

    def save(self, path):
        save_checkpoint(path, self.critic, self.generator, extra={
            "config": asdict(self.config), "alphabet": self.alphabet.residues, "epoch": self.epoch,
        })


# --------------------------------------------------------------------------
# CSV logs


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_metrics_csv(path, records, timing=False):
    """Write the per-epoch metrics table; ``seconds`` is blank unless ``timing``."""
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METRICS_HEADER)
        for r in records:
            writer.writerow([r.epoch, _fmt(r.critic_loss), _fmt(r.gen_loss), _fmt(r.kl),
                             _fmt(r.max_f), _fmt(r.seconds) if timing else ""])


def read_metrics_csv(path):
    with Path(path).open(encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != METRICS_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        rows = []
        for row in reader:
            rows.append(EpochRecord(int(row[0]), float(row[1]), float(row[2]), float(row[3]),
                                    float(row[4]), float(row[5]) if row[5] else 0.0))
    return rows


def write_batch_csv(path, rows):
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(BATCH_HEADER)
        for r in rows:
            writer.writerow([_fmt(r[k]) for k in BATCH_HEADER])


# --------------------------------------------------------------------------
# replicate experiments


def loss_kl_correlations(records):
    """Spearman rho of (critic loss, KL) and (generator loss, KL) over epochs."""
    kl = [r.kl for r in records]
    out = []
    for series in ([r.critic_loss for r in records], [r.gen_loss for r in records]):
        try:
            out.append(spearman_rho(series, kl))
        except ValueError:
            out.append(math.nan)
    return tuple(out)


def run_cell(config: TrainConfig, records, alphabet: Alphabet, out_dir=None, timing=False):
    """Train one (seed, m) cell; returns ``(history, runtime_seconds)``."""
    started = time.perf_counter()
    trainer = Trainer(config, records, alphabet)
    history = trainer.fit()
    runtime = time.perf_counter() - started
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_metrics_csv(out_dir / "metrics.csv", history, timing=timing)
        trainer.save(out_dir / "checkpoint.npz")
    return history, runtime


def _cell_job(args):
    config, records, residues, out_dir, timing = args
    history, runtime = run_cell(config, records, Alphabet(residues), out_dir, timing)
    return history, runtime


@dataclass
class CellResult:
    m: int
    seed: int
    runtime: float
    rho_critic: float
    rho_gen: float
    history: list


def run_experiment(config: TrainConfig, records, alphabet: Alphabet, seeds, ms=(1,), out_dir=None,
                   jobs=1, timing=False):
    """Train every (m, seed) cell and summarise it like the runtime/correlation table.

    Returns ``(cells, summary)`` where ``summary`` maps m to mean runtime over
    seeds and the Spearman rho of each loss series against KL, pooled over the
    seeds' epochs.
    """
    seeds, ms = list(seeds), list(ms)
    if len(set(seeds)) != len(seeds):
        raise ValueError(f"replicate seeds must be distinct, got {seeds}")
    grid = [(m, s) for m in ms for s in seeds]
    args = []
    for m, s in grid:
        cell_cfg = TrainConfig(**{**asdict(config), "m": m, "seed": s})
        cell_dir = None if out_dir is None else Path(out_dir) / f"m{m}" / f"seed{s}"
        args.append((cell_cfg, records, alphabet.residues, cell_dir, timing))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_cell_job, args))
    else:
        results = [_cell_job(a) for a in args]
    cells = []
    for (m, s), (history, runtime) in zip(grid, results):
        rho_c, rho_g = loss_kl_correlations(history)
        cells.append(CellResult(m, s, runtime, rho_c, rho_g, history))
    summary = {}
    for m in ms:
        mine = [c for c in cells if c.m == m]
        pooled = [r for c in mine for r in c.history]
        rho_c, rho_g = loss_kl_correlations(pooled)
        summary[m] = {
            "mean_runtime_s": float(np.mean([c.runtime for c in mine])),
            "rho_critic_kl": rho_c,
            "rho_gen_kl": rho_g,
        }
    if out_dir is not None:
        write_summary(Path(out_dir), cells, summary, timing=timing)
    return cells, summary


# values reported for the full-scale antibody runs (200 epochs, five seeds)
REFERENCE_TABLE = {
    1: {"mean_runtime_s": 2917.66, "rho_critic_kl": 0.7059, "rho_gen_kl": 0.4169},
    2: {"mean_runtime_s": 3079.00, "rho_critic_kl": 0.8961, "rho_gen_kl": 0.9257},
    3: {"mean_runtime_s": 3097.12, "rho_critic_kl": 0.8388, "rho_gen_kl": 0.8722},
    4: {"mean_runtime_s": 3110.64, "rho_critic_kl": 0.8921, "rho_gen_kl": 0.9205},
}


def write_summary(out_dir: Path, cells, summary, timing=False):
    """``cells.csv`` and ``summary.csv``; runtime columns stay blank unless ``timing``."""

    def seconds(value):
        return f"{value:.3f}" if timing else ""

    out_dir.mkdir(parents=True, exist_ok=True)
    with (out_dir / "cells.csv").open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["m", "seed", "runtime_s", "rho_critic_kl", "rho_gen_kl", "final_kl"])
        for c in cells:
            final = c.history[-1].kl if c.history else math.nan
            writer.writerow([c.m, c.seed, seconds(c.runtime), _fmt(c.rho_critic), _fmt(c.rho_gen), _fmt(final)])
    with (out_dir / "summary.csv").open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["m", "mean_runtime_s", "rho_critic_kl", "rho_gen_kl"])
        for m, row in summary.items():
            writer.writerow([m, seconds(row['mean_runtime_s']), _fmt(row["rho_critic_kl"]), _fmt(row["rho_gen_kl"])])


def format_summary(summary) -> str:
    lines = [f"{'m':>2} | {'mean runtime (s)':>16} | {'rho(KL, critic)':>15} | {'rho(KL, gen)':>12}"]
    lines.append("-" * len(lines[0]))
    for m, row in summary.items():
        lines.append(f"{m:>2} | {row['mean_runtime_s']:>16.2f} | {row['rho_critic_kl']:>15.4f} | {row['rho_gen_kl']:>12.4f}")
    return "\n".join(lines)
