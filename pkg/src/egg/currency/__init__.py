"""Hierarchical currency."""
