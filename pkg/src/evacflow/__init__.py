"""Evacuation-pattern workbench: crowd-flow oracle, diffusion surrogate,
evaluation harness, and a local prediction service."""

__version__ = "0.1.0"
