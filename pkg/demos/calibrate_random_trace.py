"""
Calibrating a random trace
==========================

A uniformly random trace image is matched against a small workload corpus
and calibrated at several acceptance thresholds. Lower thresholds replace
more pixels and bring the packet error down.
"""

from tlpsynth import (CalibrationParams, NicWorkloadConfig, build_corpus_index,
                      calibrate_against, make_corpus, match_ground_truth, package_error,
                      traffic_error)
from tlpsynth.extractors import NaiveExtractor
from tlpsynth.generators import random_image

W = 128

corpus = make_corpus(NicWorkloadConfig(seed=1000, n_transfers=1000), 16, W)
extractor = NaiveExtractor()
index = build_corpus_index(corpus, extractor, "cosine")

gen = random_image(seed=1, width=W)
match = match_ground_truth(gen, index, extractor)
print(f"matched {match.sample_id} (cosine {match.similarity_score:.3f})")

real = match.real_image
print(f"before: PE {package_error([gen], [real]):.0f}  TE {traffic_error([gen], [real]):.0f}")

# lambda = 1 keeps the generated image, lambda = 0 swaps in the match.
for lam in (1.0, 0.5, 0.1, 1e-4, 1e-8, 0.0):
    out = calibrate_against(gen, real, match.distance, CalibrationParams(lam=lam))
    pe = package_error([out.image], [real])
    print(f"lambda {lam:<7g} replaced {out.replaced:>5}  PE {pe:.0f}")

# The per_pixel variant scales each dispersion vector by its own distance.
out = calibrate_against(gen, real, match.distance,
                        CalibrationParams(lam=0.1, variant="per_pixel"))
print(f"per_pixel at 0.1 replaced {out.replaced}")
