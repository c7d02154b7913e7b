import json
from pathlib import Path

import pytest

from facepipe.pipeline import PipelineConfig, run_batch

FIXTURE_ROOT = Path(__file__).parent / "fixtures"
IMAGE_ROOT = FIXTURE_ROOT / "images"
GOLDEN_ROOT = Path(__file__).parent / "goldens"


@pytest.fixture(scope="session")
def fixture_meta() -> dict:
    """file name -> metadata record for the committed synthetic corpus."""
    records = json.loads((FIXTURE_ROOT / "fixtures.json").read_text())
    return {r["file"]: r for r in records}


@pytest.fixture(scope="session")
def corpus_dir() -> Path:
    return IMAGE_ROOT


@pytest.fixture(scope="session")
def detection_goldens() -> list[dict]:
    """Face/eye detections recorded once with the reference toolchain."""
    lines = (GOLDEN_ROOT / "detections.jsonl").read_text().splitlines()
    return [json.loads(line) for line in lines if line.strip()]


@pytest.fixture(scope="session")
def faithful_run(tmp_path_factory):
    """One faithful-mode batch over the whole corpus, shared read-only."""
    root = tmp_path_factory.mktemp("faithful_run") / "run"
    config = PipelineConfig(run_root=root)
    results = run_batch(IMAGE_ROOT, config)
    return config, results
