"""Labelled random substreams derived from one master seed."""

import zlib

import numpy as np


def substream(seed, label, *extra):
    """Return a Generator for ``label`` that is independent of other labels.

    The same ``(seed, label, *extra)`` always yields the same stream, so each
    pipeline stage can be re-run in isolation.
    """
    key = [int(seed) & 0xFFFFFFFF, int(seed) >> 32 & 0xFFFFFFFF, zlib.crc32(label.encode())]
    key.extend(int(e) for e in extra)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))
