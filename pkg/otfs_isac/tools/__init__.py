"""Command line tools for running the OTFS-ISAC experiments."""
