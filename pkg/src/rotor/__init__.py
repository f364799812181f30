"""Rotation numbers, capture sets and periodic orbits of superlinear planar oscillators."""
