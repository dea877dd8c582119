"""Seeded MANET simulator for trust-scored Winnow detection and secure multipath routing."""
