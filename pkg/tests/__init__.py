"""Tests for dstg-grounding."""
