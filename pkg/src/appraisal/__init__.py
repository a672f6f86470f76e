"""Appraisal engine: LLM-prompted house price estimation with ML baselines."""

__version__ = "0.1.0"
