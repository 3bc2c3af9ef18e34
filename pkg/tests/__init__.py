"""Tests for the Riemannian posterior sampler."""
