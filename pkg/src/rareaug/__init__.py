"""Rare-event tabular classification with SMOTE / conditional-GAN augmentation."""

__version__ = "0.1.0"
