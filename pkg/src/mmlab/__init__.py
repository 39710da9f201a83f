"""Desk-scale laboratory for round elimination on randomized maximal matching."""
