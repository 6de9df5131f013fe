"""Embedding-bundle extraction from torchvision models."""

from .extract import INIT_PRETRAINED, INIT_RANDOM, ExtractionSpec, extract, load_model

__all__ = ["ExtractionSpec", "INIT_PRETRAINED", "INIT_RANDOM", "extract", "load_model"]
