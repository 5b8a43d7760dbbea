from __future__ import annotations

import shutil
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

FIXTURES = Path(__file__).resolve().parents[1] / "src" / "hyperhorn" / "fixtures"

requires_solver = pytest.mark.skipif(shutil.which("z3") is None, reason="z3 executable not found")


@pytest.fixture
def fixtures() -> Path:
    return FIXTURES
