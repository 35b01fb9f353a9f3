"""Tests for the TerpreT core module."""
