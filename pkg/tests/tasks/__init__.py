"""Tests for the task data module."""
