"""Integration tests for unic-kit."""
