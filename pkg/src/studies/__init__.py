"""Synthetic designs, Monte Carlo studies and the command-line runner."""

__all__: list[str] = []
