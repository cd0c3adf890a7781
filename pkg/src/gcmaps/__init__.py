"""Granger-causality rates for vector Ornstein-Uhlenbeck processes and GC maps
for Langevin systems."""

__version__ = "0.1.0"
