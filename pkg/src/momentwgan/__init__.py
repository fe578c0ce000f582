"""Wasserstein GAN training with a higher-order central-moment generator loss."""

from .autodiff import Node, backward, set_default_dtype
from .data import Alphabet, SequenceRecord, decode, frame_and_encode, load_fasta, synth_corpus
from .evaluation import emd_1d, kl_divergence, kmer_distribution, spearman_rho
from .loss import MomentSummary, central_moments, clip_params, critic_loss, generator_loss
from .nn import CriticNet, GeneratorNet, NetConfig, load_checkpoint, sample_noise, save_checkpoint
from .train import Adam, EpochRecord, TrainConfig, Trainer, adam_step, run_experiment

__version__ = "0.1.0"
