"""Sentiment-aware SDP-enhanced multi-task relation extraction lab."""

__version__ = "0.1.0"
