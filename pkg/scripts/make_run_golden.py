#!/usr/bin/env python3
"""Freeze the batch pipeline's manifest for the fixture corpus.

Runs the default (re-detecting) configuration over tests/fixtures/images
at parallelism 1, verifies a parallelism-8 run produces byte-identical
manifest content, and commits the manifest as
tests/goldens/run_manifest_faithful.jsonl.  The test suite replays the
batch and compares bytes, which pins every routing decision, crop box
and angle for the whole corpus at once.

Re-run after regenerating fixtures or intentionally changing pipeline
behavior.  Usage: python scripts/make_run_golden.py
"""

from __future__ import annotations

import shutil
import sys
import tempfile
from pathlib import Path

from facepipe.pipeline import PipelineConfig, run_batch

REPO_ROOT = Path(__file__).resolve().parent.parent
IMAGES = REPO_ROOT / "tests" / "fixtures" / "images"
OUT = REPO_ROOT / "tests" / "goldens" / "run_manifest_faithful.jsonl"


def main() -> None:
    tmp1 = Path(tempfile.mkdtemp(prefix="run_golden_p1_"))
    tmp8 = Path(tempfile.mkdtemp(prefix="run_golden_p8_"))
    try:
        run_batch(IMAGES, PipelineConfig(run_root=tmp1, mode="faithful"), parallelism=1)
        run_batch(IMAGES, PipelineConfig(run_root=tmp8, mode="faithful"), parallelism=8)
        m1 = (tmp1 / "manifest.jsonl").read_bytes()
        m8 = (tmp8 / "manifest.jsonl").read_bytes()
        if m1 != m8:
            sys.exit("manifest differs between parallelism 1 and 8 - fix before freezing")
        OUT.parent.mkdir(parents=True, exist_ok=True)
        OUT.write_bytes(m1)
        print(f"wrote {OUT} ({len(m1.splitlines())} records)")
    finally:
        shutil.rmtree(tmp1, ignore_errors=True)
        shutil.rmtree(tmp8, ignore_errors=True)


if __name__ == "__main__":
    main()
