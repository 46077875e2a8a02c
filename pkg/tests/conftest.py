# -*- coding: utf-8 -*-
import json
from fractions import Fraction
from pathlib import Path

import pytest

from core import make_instance

FIXTURES = Path(__file__).parent / "fixtures"

COIN = [(0, Fraction(1, 2)), (1, Fraction(1, 2))]


@pytest.fixture
def two_box():
    """Two boxes, each 0 or 1 with equal odds, inspection cost 1/8."""
    return make_instance([(Fraction(1, 8), COIN), (Fraction(1, 8), COIN)])


@pytest.fixture
def two_box_path():
    return FIXTURES / "two_box.json"


@pytest.fixture
def load_fixture():
    """Parsed JSON of a frozen file under tests/fixtures."""
    def load(name: str):
        return json.loads((FIXTURES / name).read_text())
    return load
