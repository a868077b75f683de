"""Discrete-event simulator and planning toolkit for long LLM training campaigns."""

__version__ = "0.1.0"
