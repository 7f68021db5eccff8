"""Sentence-infilling text privatization with and without differential privacy."""

__version__ = "0.1.0"
