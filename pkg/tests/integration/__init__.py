"""Integration tests: end-to-end pipelines and random-instance properties."""
