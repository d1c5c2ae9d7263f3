"""Closed-loop bandit workbench for adaptive deep brain stimulation."""

__version__ = "0.1.0"
