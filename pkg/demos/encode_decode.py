"""
Traces as images
================

A short NIC workload is encoded into a 64 x 64 RGB raster and read back.
Each TLP becomes one pixel: red and green hold the size, blue the direction.
"""

import numpy as np

from tlpsynth import NicWorkloadConfig, decode_image, encode_trace, nic_workload_trace

# Twenty transfers: doorbell, descriptor fetch, payload chunks, MSI.
trace = nic_workload_trace(NicWorkloadConfig(seed=7, n_transfers=20), width=64)
print(len(trace), "records")
print(trace.records[:6])

img = encode_trace(trace, width=64)
print("first pixels:", img.pixels.reshape(-1, 3)[:6].tolist())

# Everything past the last record is black padding.
used = np.count_nonzero(img.pixels.reshape(-1, 3).any(axis=1))
print(f"{used} of {64 * 64} pixels carry records")

# The round trip is exact.
assert decode_image(img) == trace
print("decoded trace identical")
