"""Interprocess layer."""
