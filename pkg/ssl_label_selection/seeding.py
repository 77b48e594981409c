import numpy as np


def derive_seed(seed: int, *keys: int) -> int:
    """
    Derives an independent seed from a parent seed and a sequence of non-negative integer keys.
    The same (seed, keys) always yields the same value, and distinct keys yield statistically independent streams.

    :param seed: the parent seed
    :param keys: integers identifying the child stream (e.g. a restart number or a class index)
    :return: a non-negative integer usable as a seed
    """
    state = np.random.SeedSequence([int(seed), *(int(k) for k in keys)]).generate_state(2, dtype=np.uint32)
    return int(state[0]) << 31 | int(state[1]) >> 1


def rng_from(seed: int, *keys: int) -> np.random.Generator:
    """
    A numpy random generator for the stream identified by (seed, keys).
    """
    return np.random.default_rng(derive_seed(seed, *keys) if keys else int(seed))


