"""Proximal Langevin samplers on a verified Moreau-envelope core."""
__version__ = "0.1.0"
