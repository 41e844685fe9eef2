"""Contract tests for the command-line interface."""
