"""Deterministic JSON output and run manifests."""

import hashlib
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

__all__ = ["RunManifest", "dumps", "write_json", "file_digest", "output_dir", "OUTPUT_ENV"]

OUTPUT_ENV = "ARGEN_OUTPUT_DIR"


def _float(x):
    x = float(x)
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    if x == int(x) and abs(x) < 1e17:
        # keep a decimal point so the value reads back as a float
        return f"{x:.1f}"
    return format(x, ".17g")


def _encode(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist(), indent, level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{_encode(str(k), indent, level + 1)}: {_encode(v, indent, level + 1)}"
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool)
               for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        items = [pad + _encode(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent=2):
    """JSON text with every float at 17 significant digits.

    Non-finite floats become the strings ``"inf"``, ``"-inf"``, ``"nan"``.
    """
    return _encode(obj, indent, 0) + "\n"


def write_json(path, obj):
    with open(path, "w") as fh:
        fh.write(dumps(obj))


def file_digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def output_dir(flag=None):
    """``--out`` if given, else ``$ARGEN_OUTPUT_DIR``, else the working directory."""
    path = flag or os.environ.get(OUTPUT_ENV) or "."
    os.makedirs(path, exist_ok=True)
    return path


@dataclass
class RunManifest:
    """Everything needed to re-derive an output: command, settings, seed, inputs."""

    command: str
    config: dict
    seed: int
    inputs: dict = field(default_factory=dict)
    version: str = ""

    def add_input(self, path):
        self.inputs[os.path.basename(path)] = file_digest(path)

    def to_dict(self):
        return {
            "command": self.command,
            "config": self.config,
            "seed": self.seed,
            "inputs": dict(sorted(self.inputs.items())),
            "version": self.version,
        }
