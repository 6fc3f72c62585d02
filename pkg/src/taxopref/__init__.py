"""Preference queries over taxonomic attribute domains."""

__version__ = "0.1.0"
