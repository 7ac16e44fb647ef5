"""Built-in trace sources: a uniform random baseline and a NIC workload model.

Both draw from numpy's PCG64 bit generator, whose streams are fixed across
platforms for a given seed. No OS entropy is touched.

A NIC transfer expands to the causal template::

    doorbell MMIO write   (doorbell_bytes, TX)
    descriptor DMA        (descriptor_bytes, RX)
    payload DMA chunks    ceil(L / max_payload) records, RX, summing to L
    MSI write             (msi_bytes, RX)

with the payload length ``L`` uniform in ``[min(64, mtu), mtu]``. Receive
transfers follow the same shape under the fixed direction polarity, so the
drawn kind is reported by :func:`nic_workload_transfers` but does not change
the encoded records.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, NamedTuple

import numpy as np

from .codec import TraceImage, encode_trace
from .errors import ConfigError, TraceFormatError
from .trace_model import DEFAULT_WIDTH, MAX_BYTES, RX, TX, Trace

MIN_FRAME = 64


def rng_for(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed)))


def random_trace(seed: int, length: int, width: int = DEFAULT_WIDTH) -> Trace:
    """``length`` records with sizes uniform in 1..65535 and fair directions."""
    if length < 0 or length > width * width:
        raise TraceFormatError(f"length {length} outside 0..{width * width}")
    rng = rng_for(seed)
    sizes = rng.integers(1, MAX_BYTES, size=length, endpoint=True)
    dirs = rng.integers(0, 1, size=length, endpoint=True)
    return Trace(sizes, dirs, None, f"random-{seed}")


@dataclass(frozen=True)
class NicWorkloadConfig:
    seed: int = 0
    n_transfers: int = 1000
    mtu: int = 1500
    max_payload: int = 256
    doorbell_bytes: int = 4
    descriptor_bytes: int = 16
    msi_bytes: int = 4
    rx_fraction: float = 0.5

    def __post_init__(self):
        if self.n_transfers < 1:
            raise ConfigError("n_transfers must be positive")
        if self.mtu < 1 or self.mtu > MAX_BYTES:
            raise ConfigError(f"mtu must be in 1..{MAX_BYTES}")
        if not 1 <= self.max_payload <= MAX_BYTES:
            raise ConfigError(f"max_payload must be in 1..{MAX_BYTES}")
        for name in ("doorbell_bytes", "descriptor_bytes", "msi_bytes"):
            if not 1 <= getattr(self, name) <= MAX_BYTES:
                raise ConfigError(f"{name} must be in 1..{MAX_BYTES}")
        if not 0.0 <= self.rx_fraction <= 1.0:
            raise ConfigError("rx_fraction must lie in [0, 1]")


class Transfer(NamedTuple):
    kind: str
    length: int
    chunks: tuple


def chunk_payload(length: int, max_payload: int) -> tuple:
    full, rest = divmod(length, max_payload)
    return (max_payload,) * full + ((rest,) if rest else ())


def nic_workload_transfers(config: NicWorkloadConfig) -> List[Transfer]:
    rng = rng_for(config.seed)
    lo = min(MIN_FRAME, config.mtu)
    kinds = rng.random(config.n_transfers) < config.rx_fraction
    lengths = rng.integers(lo, config.mtu, size=config.n_transfers, endpoint=True)
    return [Transfer("rx" if k else "tx", int(n), chunk_payload(int(n), config.max_payload))
            for k, n in zip(kinds.tolist(), lengths.tolist())]


def expand_transfers(transfers, config: NicWorkloadConfig, source_id: str = "") -> Trace:
    sizes, dirs = [], []
    for t in transfers:
        sizes += [config.doorbell_bytes, config.descriptor_bytes]
        dirs += [TX, RX]
        sizes += t.chunks
        dirs += [RX] * len(t.chunks)
        sizes.append(config.msi_bytes)
        dirs.append(RX)
    return Trace(np.array(sizes, np.int64), np.array(dirs, np.int64), None, source_id)


def nic_workload_trace(config: NicWorkloadConfig, width: int = DEFAULT_WIDTH) -> Trace:
    trace = expand_transfers(nic_workload_transfers(config), config, f"nic-{config.seed}")
    if len(trace) > width * width:
        raise TraceFormatError(
            f"workload of {len(trace)} records exceeds {width}x{width} image capacity")
    return trace


def validate_causality(trace: Trace, config: NicWorkloadConfig) -> List[str]:
    """Linear scan for template violations; an empty list means the trace is valid.

    Doorbells are the only TX records, so they delimit transfers without
    ambiguity. Within a transfer the descriptor comes first and the MSI last;
    everything between is payload.
    """
    sizes = trace.sizes.tolist()
    dirs = trace.dirs.tolist()
    starts = [k for k, d in enumerate(dirs) if d == TX]
    problems = []
    if sizes and (not starts or starts[0] != 0):
        problems.append("record 0: trace does not start with a doorbell")
    bounds = starts + [len(sizes)]
    for a, b in zip(bounds[:-1], bounds[1:]):
        if sizes[a] != config.doorbell_bytes:
            problems.append(f"record {a}: doorbell of {sizes[a]} bytes")
        if b - a < 4:
            problems.append(f"record {a}: transfer of {b - a} records is too short")
            continue
        if sizes[a + 1] != config.descriptor_bytes:
            problems.append(f"record {a + 1}: expected descriptor fetch, got {sizes[a + 1]} bytes")
        if sizes[b - 1] != config.msi_bytes:
            problems.append(f"record {b - 1}: expected MSI, got {sizes[b - 1]} bytes")
        payload = sizes[a + 2:b - 1]
        if any(p > config.max_payload for p in payload):
            problems.append(f"record {a + 2}: payload chunk exceeds max_payload")
        if any(p != config.max_payload for p in payload[:-1]):
            problems.append(f"record {a + 2}: non-final payload chunk is short")
        total = sum(payload)
        if not min(MIN_FRAME, config.mtu) <= total <= config.mtu:
            problems.append(f"record {a + 2}: payload length {total} outside frame bounds")
    return problems


def make_corpus(config: NicWorkloadConfig, n_images: int,
                width: int = DEFAULT_WIDTH) -> List[tuple]:
    """``n_images`` workload images seeded ``config.seed + k``, ids ``corpus-0000``..."""
    if n_images < 1:
        raise ConfigError("n_images must be at least 1")
    out = []
    for k in range(n_images):
        cfg = NicWorkloadConfig(**{**config.__dict__, "seed": config.seed + k})
        out.append((f"corpus-{k:04d}", encode_trace(nic_workload_trace(cfg, width), width)))
    return out


def random_image(seed: int, width: int = DEFAULT_WIDTH) -> TraceImage:
    """A full-capacity random trace encoded as an image."""
    return encode_trace(random_trace(seed, width * width, width), width)
