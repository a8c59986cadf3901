"""Region-masked visual-textual pre-training for document images, at desk scale."""

__version__ = "0.1.0"
