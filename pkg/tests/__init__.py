"""Tests for the multicam-fusion package."""
