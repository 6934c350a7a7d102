"""Bridge to an external simulation process.

The design is written to ``design.txt`` (``name = value`` per line), the
command runs in a per-design working directory, and ``responses.csv`` plus
optional ``curve_<name>.csv`` files are read back.
"""

from __future__ import annotations

import csv
import shlex
import subprocess
from pathlib import Path

import numpy as np

from ..problem import Curve, load_curves_csv
from ..space import DesignPoint, DesignSpace
from .base import Evaluator, ResponseSet

__all__ = ["ExternalProcessEvaluator", "read_responses", "write_design"]

DEFAULT_TIMEOUT = 4 * 3600.0


def write_design(path, resolved) -> None:
    lines = [f"{name} = {float(value)!r}\n" for name, value in resolved.items()]
    Path(path).write_bytes("".join(lines).encode("ascii"))


def read_responses(workdir) -> ResponseSet:
    """Parse ``responses.csv`` and any ``curve_<name>.csv`` in ``workdir``."""
    workdir = Path(workdir)
    with open(workdir / "responses.csv", newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if len(rows) < 2:
        raise ValueError("responses.csv needs a header and a value row")
    header, values = rows[0], rows[1]
    if len(header) != len(values):
        raise ValueError("responses.csv header and value row differ in length")
    scalars = {name.strip(): float(v) for name, v in zip(header, values)}
    curves = {}
    for path in sorted(workdir.glob("curve_*.csv")):
        name = path.stem[len("curve_"):]
        loaded = load_curves_csv(path)
        if len(loaded) != 1:
            raise ValueError(f"{path.name}: expected time,value columns")
        c = next(iter(loaded.values()))
        curves[name] = Curve(c.values, c.dt, name, "")
    return ResponseSet(scalars, curves)


class ExternalProcessEvaluator(Evaluator):
    """Runs ``command`` (a template with ``{input}``, ``{output}``, ``{workdir}``)."""

    name = "external"

    def __init__(self, command: str, workdir, space: DesignSpace | None = None, timeout: float = DEFAULT_TIMEOUT, settling_end: float = 0.0):
        super().__init__(space)
        self.command = command
        self.root = Path(workdir)
        self.timeout = float(timeout)
        self.settling_end = float(settling_end)

    def _dir_for(self, point: DesignPoint) -> Path:
        if point.id >= 0:
            return self.root / f"iter_{point.iteration:03d}" / f"design_{point.id:05d}"
        digest = abs(hash(tuple(np.round(point.values, 12)))) % 10**10
        return self.root / f"adhoc_{digest:010d}"

    def _evaluate(self, point: DesignPoint) -> ResponseSet:
        wd = self._dir_for(point)
        wd.mkdir(parents=True, exist_ok=True)
        design = wd / "design.txt"
        write_design(design, point.resolved)
        cmd = self.command.format(input=shlex.quote(str(design)), output=shlex.quote(str(wd / "responses.csv")), workdir=shlex.quote(str(wd)))
        try:
            proc = subprocess.run(cmd, shell=True, cwd=wd, timeout=self.timeout, capture_output=True)
        except subprocess.TimeoutExpired:
            return ResponseSet.failed("timeout")
        if proc.returncode != 0:
            return ResponseSet.failed(f"exit_code_{proc.returncode}")
        try:
            rs = read_responses(wd)
        except (OSError, ValueError) as exc:
            return ResponseSet.failed(f"parse_error: {exc}")
        return ResponseSet(rs.scalars, rs.curves, self.settling_end)
