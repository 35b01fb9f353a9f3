"""Tests for the neural library module."""
