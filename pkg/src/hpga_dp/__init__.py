"""Geometric-algebra diffusion policies with equivariant encoders and decoders."""

__version__ = "0.1.0"
