"""Test package for mildlab-cli."""
