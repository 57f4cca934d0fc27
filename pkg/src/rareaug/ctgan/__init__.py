"""Simplified conditional tabular GAN."""

from .layout import EncodedLayout, decode_row, encode_row
from .model import (
    CtganConfig, CtganModel, build_model, discriminator_accuracy, sample, train_ctgan,
)
from .nn import AdamState, Dense, Mlp, OutputHead, adam_step, backprop
from .normalizer import GmmNormalizer, fit_normalizer

__all__ = [
    "AdamState", "CtganConfig", "CtganModel", "Dense", "EncodedLayout", "GmmNormalizer", "Mlp",
    "OutputHead", "adam_step", "backprop", "build_model", "decode_row", "discriminator_accuracy",
    "encode_row", "fit_normalizer", "sample", "train_ctgan",
]
