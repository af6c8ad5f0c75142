"""
CLI module for svs-refine

Provides the `svs-refine` command with inspect, refine, diff and bench.
"""

__all__ = ["main"]


def __getattr__(name):
    if name == "main":
        from .launcher import main

        return main
    raise AttributeError(name)
