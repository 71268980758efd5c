"""Shared, cached samples (building a 4000-point distance table is the slow part)."""

from functools import lru_cache

import pytest

from alexlab.generators import make_space, sample


@lru_cache(maxsize=None)
def cached_sample(kind, params, N, seed):
    return sample(make_space(kind, **dict(params)), N, seed)


def get(kind, N=4000, seed=0, **params):
    return cached_sample(kind, tuple(sorted(params.items())), N, seed)


@pytest.fixture(scope="session")
def samples():
    return get
