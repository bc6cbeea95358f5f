"""Seeded acceptance sweeps over generated problem families."""
