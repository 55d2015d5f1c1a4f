"""Coarse-to-fine graph generation with topological guides and diffusion bridges."""
