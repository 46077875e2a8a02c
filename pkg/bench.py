# -*- coding: utf-8 -*-
"""
@Project : pandora_pnoi
@File    : bench.py
@Date    : 2026/10/18
"""
import asyncio
import logging
import time
from fractions import Fraction
from pathlib import Path
from typing import Callable, Optional

import pandas as pd
from pydantic import BaseModel, Field, ValidationError

from core import PandoraError, PnoiInstance, ensure_valid, format_scalar, max_kappa_expectation, parse_scalar
from exact import best_structured_policy, optimal_value
from policies import half_approx, support01_optimal
from ptas import ptas_pipeline
from settings import settings
from storage import InstanceStore

logger = logging.getLogger(__name__)

METHODS = ("half-approx", "index", "support01", "structured-search", "dp", "ptas@1/10")
COLUMNS = ["instance", "method", "value", "error"]


class BenchRow(BaseModel):
    instance: str = Field(..., description="instance file stem")
    method: str = Field(..., description="method name")
    value: str = Field("", description="exact value as a rational string, empty on error")
    error: str = Field("", description="error message, empty on success")
    wall_ms: float = Field(0.0, description="wall time in milliseconds")


def method_runner(method: str) -> Callable[[PnoiInstance], Fraction]:
    """
    Resolve a method name; ptas@<eps> runs the pipeline at that epsilon
    """
    if method.startswith("ptas@"):
        epsilon = parse_scalar(method.split("@", 1)[1])
        return lambda inst: ptas_pipeline(inst, epsilon).payoff
    runners = {
        "half-approx": half_approx,
        "index": lambda inst: max_kappa_expectation(ensure_valid(inst)),
        "support01": lambda inst: support01_optimal(inst)[1],
        "structured-search": lambda inst: best_structured_policy(inst)[1],
        "dp": lambda inst: optimal_value(inst)[0],
    }
    if method not in runners:
        raise KeyError(f"unknown method {method!r}")
    return runners[method]


class BenchmarkService:
    def __init__(self, threads: Optional[int] = None):
        self.threads = threads or settings.threads

    def run_instance(self, path: Path, methods: list[str]) -> list[BenchRow]:
        rows = []
        try:
            inst = InstanceStore.read(path)
        except (OSError, ValidationError) as e:
            return [BenchRow(instance=path.stem, method=m, error=f"unreadable instance: {type(e).__name__}")
                    for m in methods]
        for method in methods:
            start = time.perf_counter()
            try:
                value = method_runner(method)(inst)
                rows.append(BenchRow(instance=path.stem, method=method, value=format_scalar(value),
                                     wall_ms=(time.perf_counter() - start) * 1000))
            except PandoraError as e:
                logger.error(f"Error running {method} on {path.name}: {e}")
                rows.append(BenchRow(instance=path.stem, method=method, error=str(e)))
        return rows

    async def _run_async(self, paths: list[Path], methods: list[str]) -> list[BenchRow]:
        semaphore = asyncio.Semaphore(self.threads)

        async def one(path: Path) -> list[BenchRow]:
            async with semaphore:
                return await asyncio.to_thread(self.run_instance, path, methods)

        results = await asyncio.gather(*(one(p) for p in paths))
        return [row for rows in results for row in rows]

    def run(self, directory, methods: list[str], timing: bool = False) -> pd.DataFrame:
        """
        Evaluate every method on every instance in a directory
        :param directory: folder of instance JSON files
        :param methods: method names
        :param timing: add a wall_ms column; the report is then no longer reproducible
        :return: report sorted by (instance, method)
        """
        for method in methods:
            method_runner(method)
        paths = InstanceStore.list_dir(directory)
        rows = asyncio.run(self._run_async(paths, methods)) if paths else []
        columns = COLUMNS + (["wall_ms"] if timing else [])
        df = pd.DataFrame([r.model_dump() for r in rows], columns=COLUMNS + ["wall_ms"])
        df = df.sort_values(["instance", "method"], kind="mergesort").reset_index(drop=True)
        logger.info(f"bench: instances={len(paths)} methods={len(methods)}")
        return df[columns]
