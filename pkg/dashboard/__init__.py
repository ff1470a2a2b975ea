"""MEMD runs web API."""
