"""
End-to-end pipeline
===================

Writes a corpus and a few generated inputs to a temporary directory, runs
the pipeline and prints the report. The same run is available from the
shell as ``tlpsynth pipeline INPUTS --corpus DIR --out DIR``.
"""

import tempfile
from pathlib import Path

from tlpsynth import (CalibrationParams, NicWorkloadConfig, PipelineConfig, make_corpus,
                      run_pipeline, write_png)
from tlpsynth.generators import random_image

W = 64

with tempfile.TemporaryDirectory() as tmp:
    root = Path(tmp)
    (root / "corpus").mkdir()
    for sid, img in make_corpus(NicWorkloadConfig(seed=0, n_transfers=300), 8, W):
        write_png(root / "corpus" / f"{sid}.png", img)

    inputs = []
    for k in range(3):
        path = root / f"gen{k}.png"
        write_png(path, random_image(100 + k, W))
        inputs.append(str(path))

    cfg = PipelineConfig(input_paths=inputs, corpus_dir=str(root / "corpus"),
                         output_dir=str(root / "out"), width=W,
                         calibration=CalibrationParams(lam=1e-8))
    report = run_pipeline(cfg)

    # Resolved config as comments, then one row per input and metric.
    print(report.render())
    print(sorted(p.name for p in (root / "out").iterdir()))
