"""JSON instance files and solve reports.

Instance document::

    {
      "name": "toy",
      "n": 1,
      "box": {"lower": [-1.0], "upper": [1.0]},
      "Y": [[0.0], [1.0], [2.0]],
      "cone": [{"kind": "orthant", "dim": 1}],
      "objective": <expression>,
      "constraints": [<expression> | <soc_affine>, ...],
      "slater_hints": {"0": [-1.0]}
    }

Constraint entries are consumed in cone-block order: an orthant block of
dimension ``d`` takes ``d`` expression rows, a ``soc`` block takes a single
``{"type": "soc_affine", "Ax": [[...]], "Ay": [[...]], "b": [...]}`` entry.
Floats are written with Python's shortest round-trip repr, so parse and
serialize are exact inverses.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

from .cones import ConeSpec
from .errors import InputError
from .expr import expr_from_dict
from .model import Instance, SocAffine

SCHEMA = 1


def _constraint_from_dict(d):
    if isinstance(d, dict) and d.get("type") == "soc_affine":
        try:
            return SocAffine(d["Ax"], d["Ay"], d["b"])
        except KeyError as exc:
            raise InputError(f"soc_affine entry is missing key {exc}") from None
    return expr_from_dict(d)


def instance_from_dict(doc) -> Instance:
    if not isinstance(doc, dict):
        raise InputError("instance document must be a JSON object")
    try:
        hints = {int(k): v for k, v in doc.get("slater_hints", {}).items()}
        return Instance(
            n=int(doc["n"]),
            lower=doc["box"]["lower"],
            upper=doc["box"]["upper"],
            Y=doc["Y"],
            cone=ConeSpec.from_list(doc["cone"]),
            objective=expr_from_dict(doc["objective"]),
            constraints=[_constraint_from_dict(c) for c in doc["constraints"]],
            slater_hints=hints,
            name=doc.get("name", ""),
        )
    except KeyError as exc:
        raise InputError(f"instance document is missing key {exc}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"malformed instance document: {exc}") from None


def instance_to_dict(inst: Instance) -> dict:
    doc = {
        "name": inst.name,
        "n": inst.n,
        "box": {"lower": list(inst.lower), "upper": list(inst.upper)},
        "Y": [list(y) for y in inst.Y],
        "cone": inst.cone.to_list(),
        "objective": inst.objective.to_dict(),
        "constraints": [c.to_dict() for c in inst.constraints],
    }
    if inst.slater_hints:
        doc["slater_hints"] = {str(k): list(x) for k, x in inst.slater_hints}
    return doc


def load_instance(path) -> Instance:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from None
    return instance_from_dict(doc)


def dumps(doc) -> str:
    return json.dumps(_finite(doc), indent=2, sort_keys=True, allow_nan=False) + "\n"


def save_instance(inst: Instance, path) -> None:
    Path(path).write_text(dumps(instance_to_dict(inst)))


def _finite(obj):
    # JSON has no infinities; unbounded values are written as null
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


def report_to_dict(report, eps, cfg, seed) -> dict:
    """Machine-readable solve report (schema 1)."""
    from dataclasses import asdict

    x, y = report.best_point if report.best_point is not None else (None, None)
    return {
        "schema": SCHEMA,
        "status": report.status.value,
        "best_value": report.best_value,
        "best_x": None if x is None else [float(v) for v in x],
        "best_y": None if y is None else [float(v) for v in y],
        "final_eta": report.final_eta,
        "final_ubd": report.final_ubd,
        "primal_solves": report.primal_solves,
        "eps": eps,
        "config": asdict(cfg),
        "trace": [rec.to_dict() for rec in report.iterations],
        "diagnostics": list(report.diagnostics),
        "seed": seed,
        "wall_time_ms": round(report.wall_time * 1000.0, 3),
    }
