"""Bundled dataset corpus and the reproduction expectations harness."""
from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

from .errors import InvalidInputError
from .garrote import FitReport
from .io import factors_from_config, load_config, load_design

BUNDLED_IDS = (
    "toy_pb12",
    "frac_2_9_5",
    "router_bit",
    "cast_fatigue",
    "blood_glucose",
    "resin_dsd",
    "epoxy_ssd",
)

_CHECK_KINDS = {
    "selected_superset",
    "coefficient_range",
    "coefficient_sign",
    "refit_r2_min",
    "extras_small",
}


def _data_path(name):
    return resources.files("higarrote").joinpath("data", name)


@dataclass
class ExpectationCheck:
    """One reproduction check with its literature provenance."""

    kind: str
    params: dict
    provenance: str


@dataclass
class DatasetBundle:
    id: str
    design_path: object
    config_path: object
    expected: list


def bundle(dataset_id: str) -> DatasetBundle:
    """Load a bundled dataset's paths and expectations."""
    if dataset_id not in BUNDLED_IDS:
        raise InvalidInputError(
            f"unknown dataset {dataset_id!r}; bundled: {', '.join(BUNDLED_IDS)}"
        )
    raw = json.loads(_data_path(f"{dataset_id}_expected.json").read_text())
    checks = []
    for entry in raw["checks"]:
        prov = entry.get("provenance", "").strip()
        if not prov:
            raise InvalidInputError(
                f"{dataset_id}: expectation without provenance refused: {entry}"
            )
        kind = entry["kind"]
        if kind not in _CHECK_KINDS:
            raise InvalidInputError(f"{dataset_id}: unknown check kind {kind!r}")
        params = {k: v for k, v in entry.items() if k not in ("kind", "provenance")}
        checks.append(ExpectationCheck(kind=kind, params=params, provenance=prov))
    return DatasetBundle(
        id=dataset_id,
        design_path=_data_path(f"{dataset_id}.csv"),
        config_path=_data_path(f"{dataset_id}.json"),
        expected=checks,
    )


def load_dataset(dataset_id: str):
    """(DesignTable, config dict) for a bundled dataset."""
    bun = bundle(dataset_id)
    config = load_config(bun.config_path)
    design = load_design(bun.design_path, config)
    return design, config


def dataset_factors(dataset_id: str):
    return factors_from_config(load_config(bundle(dataset_id).config_path))


@dataclass
class CheckResult:
    description: str
    passed: bool
    detail: str
    provenance: str


def evaluate_expectations(report: FitReport, bun: DatasetBundle) -> list:
    """Run every bundled check against a fit report."""
    effects = dict(report.effects)
    results = []
    for check in bun.expected:
        p = check.params
        if check.kind == "selected_superset":
            missing = [lab for lab in p["labels"] if lab not in effects]
            ok = not missing
            detail = "all present" if ok else f"missing {missing}"
            desc = f"selected set contains {{{', '.join(p['labels'])}}}"
        elif check.kind == "coefficient_range":
            lab = p["label"]
            val = effects.get(lab)
            ok = val is not None and p["lo"] <= val <= p["hi"]
            detail = (
                f"{lab} = {val:.4f} in [{p['lo']}, {p['hi']}]" if ok
                else (f"{lab} not selected" if val is None
                      else f"{lab} = {val:.4f} outside [{p['lo']}, {p['hi']}]")
            )
            desc = f"coefficient {lab} in [{p['lo']}, {p['hi']}]"
        elif check.kind == "coefficient_sign":
            lab = p["label"]
            val = effects.get(lab)
            ok = val is not None and val * p["sign"] > 0
            detail = (
                f"{lab} = {val:.4f}" if val is not None else f"{lab} not selected"
            )
            desc = f"sign({lab}) = {'+' if p['sign'] > 0 else '-'}"
        elif check.kind == "refit_r2_min":
            ok = report.r_squared >= p["value"]
            detail = f"refit R^2 = {report.r_squared:.4f} (floor {p['value']})"
            desc = f"refit R^2 >= {p['value']}"
        elif check.kind == "extras_small":
            core = set(p["core"])
            extras = {lab: v for lab, v in effects.items() if lab not in core}
            bad = {lab: v for lab, v in extras.items() if abs(v) >= p["max_abs"]}
            ok = not bad
            detail = "no large extras" if ok else f"large extras: {bad}"
            desc = f"extra effects below {p['max_abs']} in magnitude"
        else:  # unreachable: kinds validated at load
            raise InvalidInputError(check.kind)
        results.append(
            CheckResult(description=desc, passed=ok, detail=detail,
                        provenance=check.provenance)
        )
    return results
