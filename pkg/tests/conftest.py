import functools

import pytest

from otfkm.clifford import build_system

SMOKE = [(1, 3, "standard"), (2, 2, "standard"), (4, 2, "q-same"), (4, 2, "q-opposite")]


@functools.lru_cache(maxsize=None)
def system(m, k, variant="standard"):
    return build_system(m, k, variant)


def ids(cases):
    return [f"m{m}-k{k}-{v}" for m, k, v in cases]


@pytest.fixture(params=SMOKE, ids=ids(SMOKE))
def smoke(request):
    return system(*request.param)
