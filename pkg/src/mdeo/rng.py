"""Seed fan-out: every random consumer draws from its own named substream.

A stream is identified by ``(global seed, crc32(component name), index)``, so
adding a network or a component never shifts the draws of another.
"""
from __future__ import annotations

import zlib

import numpy as np


def component_key(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


def substream(seed: int, component: str, index: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), component_key(component), int(index)]))


def substream_seed(seed: int, component: str, index: int = 0) -> int:
    ss = np.random.SeedSequence([int(seed), component_key(component), int(index)])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def genome_seed(base_seed: int, genes) -> int:
    """32-bit seed keyed on a genome (for common random numbers per genome)."""
    payload = repr((int(base_seed), tuple(genes))).encode("ascii")
    return zlib.crc32(payload)
