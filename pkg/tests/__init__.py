"""Test package for the LSALSA sparse coding toolkit."""
