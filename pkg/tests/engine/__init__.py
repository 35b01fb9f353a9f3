"""Tests for the tensor engine module."""
