# -*- coding: utf-8 -*-
import json
from fractions import Fraction

import pandas as pd
import pytest
from pydantic import ValidationError

from exact import StructuredPolicy
from settings import load_settings
from storage import ArtifactStore, InstanceStore


def test_instance_store_round_trip(two_box, tmp_path):
    path = tmp_path / "inst.json"
    InstanceStore.write(path, two_box)
    assert InstanceStore.read(path) == two_box


def test_list_dir_is_sorted(two_box, tmp_path):
    for name in ("b.json", "a.json", "notes.txt"):
        (tmp_path / name).write_text("{}")
    assert [p.name for p in InstanceStore.list_dir(tmp_path)] == ["a.json", "b.json"]


def test_read_rejects_bad_records(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"boxes": [{"cost": true, "support": [[0, 1]]}]}')
    with pytest.raises(ValidationError):
        InstanceStore.read(path)


def test_structured_policy_file(tmp_path):
    policy = StructuredPolicy(committed=(1, 0), thresholds=(Fraction(1, 2),))
    path = tmp_path / "policy.json"
    ArtifactStore.write_structured_policy(path, policy)
    assert json.loads(path.read_text()) == {"sigma": [1, 0], "thresholds": ["1/2"]}
    assert ArtifactStore.read_structured_policy(path) == policy


def test_csv_uses_unix_newlines(tmp_path):
    path = tmp_path / "r.csv"
    ArtifactStore.write_csv(path, pd.DataFrame([{"a": "1/2", "b": 3}]))
    assert path.read_bytes() == b"a,b\n1/2,3\n"


def test_settings_from_environment(monkeypatch):
    monkeypatch.setenv("PANDORA_DP_LIMIT", "9")
    monkeypatch.setenv("PANDORA_LOG_LEVEL", "DEBUG")
    loaded = load_settings()
    assert loaded.dp_limit == 9
    assert loaded.log_level == "DEBUG"


def test_settings_reject_nonsense(monkeypatch):
    monkeypatch.setenv("PANDORA_THREADS", "0")
    with pytest.raises(ValidationError):
        load_settings()
