"""Tests for the configuration module."""
