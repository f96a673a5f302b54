"""Tests package for IndexLab."""
