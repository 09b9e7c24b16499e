import json
import shutil
from pathlib import Path

import pytest

CORPUS = Path(__file__).resolve().parents[2] / "corpus"


@pytest.fixture(scope="session")
def manifest():
    return json.loads((CORPUS / "manifest.json").read_text())["fixtures"]


@pytest.fixture
def repo(tmp_path):
    dst = tmp_path / "repo"
    shutil.copytree(CORPUS, dst, ignore=shutil.ignore_patterns("*.o", "*.a", "build"))
    return dst
