"""Degenerate diffusion laboratory."""
