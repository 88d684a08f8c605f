"""Shared state for the test-suite: acceptance records and cached round trips."""

import time

import numpy as np

from zollfrei.disks import QGrid, SolverConfig
from zollfrei.embedding import TotallyRealEmbedding, random_embedding
from zollfrei.reconstruction import roundtrip_certify

RECORDS = []

# settings shared by the round-trip criteria
ROUNDTRIP_GRID = (8, 14)
ROUNDTRIP_MODES = 12
ROUNDTRIP_SEEDS = (11, 12, 13)
NORM = 0.05

_ROUNDTRIPS = {}


def record(label, passed, detail):
    """Store and print one pass/fail line for an acceptance criterion."""
    line = f"{label} {'PASS' if passed else 'FAIL'}: {detail}"
    RECORDS.append(line)
    print(line)
    return passed


def embedding_for(seed):
    return random_embedding(np.random.default_rng(seed), degree=3, norm=NORM)


def nearby_embedding(seed, rel=0.05, nudge_seed=99):
    """``v + rel * |v| * w`` with ``w`` a random unit-sup-norm field of the same degree."""
    base = embedding_for(seed)
    w = random_embedding(np.random.default_rng(nudge_seed), degree=3, norm=rel * NORM)
    return TotallyRealEmbedding(base.field + w.field)


def roundtrip(key, P):
    """Round trip of ``P`` on the acceptance grid, computed once per session."""
    if key not in _ROUNDTRIPS:
        t0 = time.perf_counter()
        rep = roundtrip_certify(P, grid=QGrid(*ROUNDTRIP_GRID),
                                cfg=SolverConfig(modes=ROUNDTRIP_MODES), n_geod=50, seed=0)
        rep["seconds"] = time.perf_counter() - t0
        _ROUNDTRIPS[key] = rep
    return _ROUNDTRIPS[key]


def roundtrip_seed(seed):
    return roundtrip(("v", seed), embedding_for(seed))
