"""Numerical tolerances and size caps shared by every module."""

from __future__ import annotations

#: Row/bound feasibility tolerance for float-mode LP solving.
FEAS_TOL = 1e-9
#: Reduced-cost tolerance for float-mode LP solving.
OPT_TOL = 1e-9
#: Tolerance used when reporting or comparing float results.
REPORT_TOL = 1e-7
#: Smallest pivot magnitude accepted in float mode.
PIVOT_TOL = 1e-9

#: Maximum number of type profiles enumerated for exact expectations.
PROFILE_CAP = 10**6
#: Maximum number of generators per type polytope.
GENERATOR_CAP = 10**5
#: Maximum product-support size for exact eta expectations.
ETA_CAP = 10**6
#: Maximum number of candidate price vectors for the exhaustive RPP search.
RPP_SEARCH_CAP = 20000

#: Default number of type draws for sampled polytopes.
DEFAULT_POLY_SAMPLES = 200

#: Stand-in for an infinite posted price.
INF_PRICE = float("inf")

#: Package version embedded in CLI reports.
VERSION = "0.1.0"
