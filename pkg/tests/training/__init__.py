"""Tests for the training module."""
