"""Hurdle generalized lambda distribution models."""
