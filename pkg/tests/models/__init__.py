"""Tests for the task models module."""
