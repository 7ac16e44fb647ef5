"""Calibrate generative-model output into valid PCIe TLP traces.

Traces are encoded as RGB images, matched against a corpus of real trace
images, filtered by a dispersion score, and decoded back to traces.
"""

from .calibration import (CalibrationParams, DispersionField, DistanceField, calibrate,
                          calibrate_against, dispersion_field, distance_field, pixel_distance,
                          replacement_mask)
from .codec import (PADDING, TraceImage, decode_image, decode_pixel, encode_record,
                    encode_trace, normalize_image, read_png, write_png)
from .errors import (ConfigError, DimensionMismatch, ExtractorError, ImageFormatError,
                     TlpError, TraceFormatError)
from .extractors import (CorpusIndex, Embedding, MatchResult, build_corpus_index,
                         cosine_similarity, extract_histogram, extract_naive, get_extractor,
                         load_external_embeddings, match_ground_truth, psnr)
from .generators import (NicWorkloadConfig, make_corpus, nic_workload_trace, random_trace,
                         validate_causality)
from .metrics import (MetricWeights, frechet_embedding_distance, harmonic_mean, package_error,
                      segment_aggregate, traffic_error)
from .pipeline import PipelineConfig, PipelineReport, run_pipeline
from .trace_model import TX, RX, TlpRecord, Trace, parse_trace_text, write_trace_text

__version__ = "0.1.0"
