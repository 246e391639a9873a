"""Design-file loading: CSV of level labels plus a JSON/TOML sidecar config.

Config schema:

    {
      "factors":  [{"name", "kind", "levels", "coding"?}, ...],
      "response": {"column": str, "transform"?: "log", "replicates"?: int}
    }

Level cells are matched against the config's level labels as strings.
Replicated responses use columns <column>_1 .. <column>_m.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .design import DesignTable, FactorSpec
from .errors import ParseError


def load_config(path) -> dict:
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".toml":
        try:
            import tomllib
        except ImportError:
            import tomli as tomllib
        try:
            return tomllib.loads(text)
        except Exception as exc:
            raise ParseError(f"{path}: invalid TOML: {exc}")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc.msg}", line=exc.lineno,
                         column=exc.colno)


def factors_from_config(config: dict):
    try:
        raw = config["factors"]
    except KeyError:
        raise ParseError("config is missing the 'factors' list")
    factors = []
    for entry in raw:
        try:
            factors.append(
                FactorSpec(
                    name=str(entry["name"]),
                    kind=str(entry["kind"]),
                    levels=tuple(str(v) for v in entry["levels"]),
                    coding=entry.get("coding"),
                )
            )
        except KeyError as exc:
            raise ParseError(f"factor entry is missing key {exc}")
    return factors


def _response_columns(config: dict):
    resp = config.get("response", {})
    base = resp.get("column", "response")
    m = int(resp.get("replicates", 1))
    if m < 1:
        raise ParseError("response.replicates must be >= 1")
    if m == 1:
        return [base], resp.get("transform"), 1
    return [f"{base}_{i}" for i in range(1, m + 1)], resp.get("transform"), m


def load_design(csv_path, config: dict) -> DesignTable:
    """Parse a design CSV against its config; errors carry the cell location."""
    factors = factors_from_config(config)
    resp_cols, transform, m = _response_columns(config)
    level_index = {
        f.name: {lab: i for i, lab in enumerate(f.levels)} for f in factors
    }
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError(f"{csv_path}: file is empty")
        col_of = {name: i for i, name in enumerate(header)}
        for f in factors:
            if f.name not in col_of:
                raise ParseError(f"{csv_path}: missing factor column {f.name!r}", line=1)
        for rc in resp_cols:
            if rc not in col_of:
                raise ParseError(f"{csv_path}: missing response column {rc!r}", line=1)
        runs, response = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            run = []
            for f in factors:
                ci = col_of[f.name]
                if ci >= len(row):
                    raise ParseError(f"{csv_path}: short row", line=lineno)
                cell = row[ci].strip()
                try:
                    run.append(level_index[f.name][cell])
                except KeyError:
                    raise ParseError(
                        f"{csv_path}: {cell!r} is not a level of factor {f.name!r}",
                        line=lineno, column=ci + 1,
                    )
            obs = []
            for rc in resp_cols:
                ci = col_of[rc]
                cell = row[ci].strip() if ci < len(row) else ""
                try:
                    val = float(cell)
                except ValueError:
                    raise ParseError(
                        f"{csv_path}: response cell {cell!r} is not a number",
                        line=lineno, column=ci + 1,
                    )
                if transform == "log":
                    if val <= 0:
                        raise ParseError(
                            f"{csv_path}: log transform needs positive values, got {cell!r}",
                            line=lineno, column=ci + 1,
                        )
                    val = math.log(val)
                elif transform not in (None, "", "none"):
                    raise ParseError(f"unknown response transform {transform!r}")
                obs.append(val)
            runs.append(run)
            response.append(obs[0] if m == 1 else obs)
    if not runs:
        raise ParseError(f"{csv_path}: no data rows")
    return DesignTable(
        factors=factors,
        runs=np.array(runs, dtype=int),
        response=np.array(response, dtype=float),
        replicate_count=m,
    )


def write_design_csv(design: DesignTable, path, response_column: str = "response"):
    """Serialize a design back to CSV (response written as repr floats)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if design.replicate_count == 1:
            resp_cols = [response_column]
        else:
            resp_cols = [f"{response_column}_{i}"
                         for i in range(1, design.replicate_count + 1)]
        writer.writerow([f.name for f in design.factors] + resp_cols)
        resp = np.atleast_2d(design.response.T).T
        for i in range(design.n_runs):
            cells = [
                design.factors[j].levels[design.runs[i, j]]
                for j in range(design.n_factors)
            ]
            cells += [repr(float(v)) for v in resp[i]]
            writer.writerow(cells)


def design_equal(a: DesignTable, b: DesignTable) -> bool:
    """Structural equality: factors, level indices, response, replicates."""
    if a.replicate_count != b.replicate_count:
        return False
    if [f.name for f in a.factors] != [f.name for f in b.factors]:
        return False
    for fa, fb in zip(a.factors, b.factors):
        if (fa.kind, fa.levels) != (fb.kind, fb.levels):
            return False
        ca = fa.coding if isinstance(fa.coding, (str, type(None))) else np.asarray(fa.coding)
        cb = fb.coding if isinstance(fb.coding, (str, type(None))) else np.asarray(fb.coding)
        if isinstance(ca, np.ndarray) or isinstance(cb, np.ndarray):
            if not (isinstance(ca, np.ndarray) and isinstance(cb, np.ndarray)
                    and ca.shape == cb.shape and np.array_equal(ca, cb)):
                return False
        elif ca != cb:
            return False
    return (
        np.array_equal(a.runs, b.runs)
        and a.response.shape == b.response.shape
        and np.array_equal(a.response, b.response)
    )
