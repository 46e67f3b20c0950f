"""Tests for macorner."""
