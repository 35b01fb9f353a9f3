"""Tests for the command line module."""
