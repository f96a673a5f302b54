"""Numerical library: lattice, models, spectra and topological indices."""
