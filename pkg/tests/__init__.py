"""Tests for thinsieve."""
