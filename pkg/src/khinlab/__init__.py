"""Exact-arithmetic tools for counting and overlapping shifted two-dimensional approximation sets."""
