"""Tests for ncsbound."""
