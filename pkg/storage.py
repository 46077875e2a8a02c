# -*- coding: utf-8 -*-
"""
@Project : pandora_pnoi
@File    : storage.py
@Date    : 2026/10/18
"""
import json
import logging
from pathlib import Path
from typing import Union

import pandas as pd
from pydantic import ValidationError

from core import PnoiInstance, instance_from_json, instance_to_json
from exact import PolicyTrace, StructuredPolicy, ValueTable
from ptas import SsdpPolicy

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


class InstanceStore:
    @staticmethod
    def read(path: PathLike) -> PnoiInstance:
        """
        Load an instance file; the instance is parsed but not validated
        :param path: JSON instance file
        :return: instance
        """
        try:
            return instance_from_json(Path(path).read_text(encoding="utf-8"))
        except (OSError, ValidationError) as e:
            logger.error(f"Error reading instance {path}: {e}")
            raise

    @staticmethod
    def write(path: PathLike, inst: PnoiInstance) -> None:
        try:
            Path(path).write_text(instance_to_json(inst) + "\n", encoding="utf-8")
        except OSError as e:
            logger.error(f"Error writing instance {path}: {e}")
            raise

    @staticmethod
    def list_dir(directory: PathLike) -> list[Path]:
        """Instance files of a directory, sorted by name."""
        return sorted(p for p in Path(directory).iterdir() if p.is_file() and p.suffix == ".json")


class ArtifactStore:
    @staticmethod
    def _write_json(path: PathLike, payload) -> None:
        try:
            Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
        except OSError as e:
            logger.error(f"Error writing {path}: {e}")
            raise

    @staticmethod
    def write_table(path: PathLike, table: ValueTable) -> None:
        ArtifactStore._write_json(path, [r.model_dump(mode="json") for r in table.to_records()])

    @staticmethod
    def write_structured_policy(path: PathLike, policy: StructuredPolicy) -> None:
        ArtifactStore._write_json(path, policy.to_json_dict())

    @staticmethod
    def read_structured_policy(path: PathLike) -> StructuredPolicy:
        try:
            return StructuredPolicy.from_json_dict(json.loads(Path(path).read_text(encoding="utf-8")))
        except (OSError, json.JSONDecodeError) as e:
            logger.error(f"Error reading policy {path}: {e}")
            raise

    @staticmethod
    def write_ssdp_policy(path: PathLike, policy: SsdpPolicy) -> None:
        ArtifactStore._write_json(path, [r.model_dump(mode="json") for r in policy.to_records()])

    @staticmethod
    def write_meta(path: PathLike, meta: dict[str, str]) -> None:
        ArtifactStore._write_json(path, meta)

    @staticmethod
    def write_traces(path: PathLike, traces: list[PolicyTrace]) -> None:
        """One JSON trace per line."""
        try:
            with open(path, "w", encoding="utf-8") as f:
                for trace in traces:
                    f.write(trace.model_dump_json() + "\n")
        except OSError as e:
            logger.error(f"Error writing traces {path}: {e}")
            raise

    @staticmethod
    def write_csv(path: PathLike, df: pd.DataFrame) -> None:
        try:
            df.to_csv(path, index=False, lineterminator="\n")
        except OSError as e:
            logger.error(f"Error writing report {path}: {e}")
            raise

    @staticmethod
    def write_xlsx(path: PathLike, df: pd.DataFrame, sheet_name: str = "report") -> None:
        """Spreadsheet copy of a report, each column sized to its longest entry."""
        try:
            with pd.ExcelWriter(path, engine="xlsxwriter") as writer:
                df.to_excel(writer, index=False, sheet_name=sheet_name)
                worksheet = writer.sheets[sheet_name]
                for i, col in enumerate(df.columns):
                    width = max([len(str(v)) for v in df[col]] + [len(col)]) + 2
                    worksheet.set_column(i, i, min(width, 60))
        except OSError as e:
            logger.error(f"Error writing workbook {path}: {e}")
            raise
