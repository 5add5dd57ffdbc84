"""Extractive bug report summarization with crowdsourced sentence attributes."""

__version__ = "0.1.0"
