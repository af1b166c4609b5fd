"""Bigraded variational calculus on jet bundles and the BV construction
for the Poisson sigma model."""

__version__ = "0.1.0"
