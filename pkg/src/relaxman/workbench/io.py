"""File formats and run manifests."""
from __future__ import annotations

import csv
import hashlib
import json
import os
from pathlib import Path
from typing import Any

import numpy as np

from .. import __version__
from ..model import ModelSystem, builtin_model
from ..multiplier import GridFunction
from ..reduction import ReducedSystem, builtin_reduced, reduce


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def file_hash(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _parse_builtin(spec: str) -> tuple[str, dict]:
    # "builtin:dv-bgk?N=6&coupling=0.2"
    body = spec.split(":", 1)[1]
    name, _, query = body.partition("?")
    params = {}
    for item in filter(None, query.split("&")):
        k, _, v = item.partition("=")
        params[k] = float(v) if "." in v or "e" in v.lower() else int(v)
    return name, params


def load_model(path: str) -> ModelSystem:
    if path.startswith("builtin:"):
        name, params = _parse_builtin(path)
        m = builtin_model(name, **params)
        if not isinstance(m, ModelSystem):
            raise ValueError(f"{name} is a reduced system, not a full model")
        return m
    return ModelSystem.from_json(Path(path).read_text())


def load_reduced(path: str, side: str = "plus") -> ReducedSystem:
    """A reduced system from ``reduced.json``, a full model file (reduced on
    ``side``) or a ``builtin:`` catalog name."""
    if path.startswith("builtin:"):
        name, params = _parse_builtin(path)
        if name in ("toy3", "dv-bgk"):
            return reduce(builtin_model(name, **params), side)
        return builtin_reduced(name, **params)
    d = json.loads(Path(path).read_text())
    if "Gamma" in d:
        return ReducedSystem.from_dict(d)
    return reduce(ModelSystem.from_dict(d), side)


def input_hash(path: str) -> str:
    if path.startswith("builtin:"):
        return sha256_text(path)
    return file_hash(path)


def write_json(path: str | Path, obj: Any) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def write_trajectory_csv(path: str | Path, g: GridFunction) -> None:
    d = g.d
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        cols = ["tau"] + [f"v_{i + 1}" for i in range(d)]
        if g.derivs is not None:
            cols += [f"dv_{i + 1}" for i in range(d)]
        w.writerow(cols)
        for j in range(g.n):
            row = [repr(float(g.tau[j]))] + [repr(float(x)) for x in g.values[j]]
            if g.derivs is not None:
                row += [repr(float(x)) for x in g.derivs[j]]
            w.writerow(row)


def read_trajectory_csv(path: str | Path) -> GridFunction:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], np.array(rows[1:], dtype=float)
    if header[0] != "tau":
        raise ValueError("first CSV column must be 'tau'")
    vcols = [i for i, h in enumerate(header) if h.startswith("v_")]
    dcols = [i for i, h in enumerate(header) if h.startswith("dv_")]
    tau = data[:, 0]
    if tau.size < 2:
        raise ValueError("trajectory needs at least two rows")
    dt = float(tau[1] - tau[0])
    if np.max(np.abs(np.diff(tau) - dt)) > 1e-9 * max(1.0, abs(dt)):
        raise ValueError("trajectory grid must be uniform")
    derivs = data[:, dcols] if dcols else None
    return GridFunction(float(tau[0]), dt, data[:, vcols], derivs)


def write_scan_csv(path: str | Path, omega, norm_R, norm_RG) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["omega", "norm_R", "norm_R_times_Gamma"])
        for row in zip(omega, norm_R, norm_RG):
            w.writerow([repr(float(x)) for x in row])


def worker_count() -> int:
    env = os.environ.get("KM_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return max(1, min(4, os.cpu_count() or 1))


def make_manifest(command: str, inputs: dict[str, str], config: dict, outputs: list[str], seed: int) -> dict:
    man = {
        "command": command,
        "input_hashes": {k: input_hash(v) for k, v in inputs.items()},
        "inputs": inputs,
        "config": config,
        "outputs": outputs,
        "versions": {"relaxman": __version__, "numpy": np.__version__},
        "seed": seed,
    }
    man["hash"] = sha256_text(canonical_json(man))
    return man


def write_manifest(out_path: str | Path, manifest: dict) -> Path:
    p = Path(str(out_path) + ".manifest.json")
    write_json(p, manifest)
    return p
