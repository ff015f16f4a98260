"""Random stream splitting.

Every run has one root seed. Independent streams are derived from it with
:class:`numpy.random.SeedSequence` spawn keys ``(purpose, chain)``, where the
chain label is global across workers. Changing the number of chains or
workers therefore never makes two chains share a stream, and the hold-time
stream of a chain is the same in every algorithm that runs that chain.
"""

import numpy as np

KERNEL = 0
HOLD = 1
COORDINATOR = 2
INIT = 3
REPEAT = 4


def _root(seed):
    if isinstance(seed, np.random.SeedSequence):
        return seed.entropy
    return int(seed)


def stream(seed, purpose, index=0):
    """Return the generator for ``(purpose, index)`` under root ``seed``."""
    ss = np.random.SeedSequence(_root(seed), spawn_key=(purpose, index))
    return np.random.default_rng(ss)


def kernel_streams(seed, n_chains):
    """Generators driving the local and exchange kernels, one per chain."""
    return [stream(seed, KERNEL, i) for i in range(n_chains)]


def hold_streams(seed, n_chains):
    """Generators for virtual hold times, one per chain."""
    return [stream(seed, HOLD, i) for i in range(n_chains)]


def coordinator_stream(seed):
    """Generator used by the exchange coordinator."""
    return stream(seed, COORDINATOR)


def init_stream(seed):
    """Generator used to build initial chain states."""
    return stream(seed, INIT)


def repeat_seed(seed, r: int) -> int:
    """Root seed of repeat ``r``; repeat 0 keeps ``seed`` itself."""
    if r == 0:
        return int(seed)
    return int(stream(seed, REPEAT, r).integers(2**63))
