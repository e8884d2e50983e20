"""Shared test configuration.

Hypothesis deadlines are disabled: several property subjects integrate
ODEs or run Newton solves whose wall time varies too much for per-example
deadlines to be meaningful.
"""

from hypothesis import settings

settings.register_profile("relaydyn", deadline=None, max_examples=50)
settings.load_profile("relaydyn")
