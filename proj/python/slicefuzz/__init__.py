"""Prune false-positive buffer-overflow warnings by slicing and fuzzing."""

import json
import os
from pathlib import Path

from . import _slicefuzz
from ._slicefuzz import Error, StageOrderError, warning_id

__all__ = ["Error", "StageOrderError", "warning_id", "load_warnings", "run", "classify",
           "report_text", "match_persistent"]

_BIN = Path(__file__).resolve().parent / "bin"

# A wheel ships the compiler shim next to the module.
if "SLICEFUZZ_SHIM" not in os.environ and (_BIN / "slicefuzz-cc-shim").is_file():
    os.environ["SLICEFUZZ_SHIM"] = str(_BIN / "slicefuzz-cc-shim")


def load_warnings(path, format="jsonl", repo_root=None):
    """Returns (warnings, diagnostics) as lists of dicts."""
    r = json.loads(_slicefuzz.load_warnings(Path(path), format,
                                            None if repo_root is None else Path(repo_root)))
    return r["warnings"], r["diagnostics"]


def run(repo, warnings, out, build_cmd="make", budget=300.0, seed=1, workers=1,
        severity_policy="", shim=None):
    """Runs every stage. Returns (exit_status, report)."""
    rc, report = _slicefuzz.run(Path(repo), Path(warnings), Path(out), build_cmd, float(budget),
                                int(seed), int(workers), severity_policy,
                                None if shim is None else Path(shim))
    return rc, json.loads(report)


def classify(out):
    return json.loads(_slicefuzz.classify(Path(out)))


def report_text(report):
    return _slicefuzz.report_text(json.dumps(report))


def match_persistent(old_report, old_root, new_warnings, new_root, require_new_pfp=False):
    return json.loads(_slicefuzz.match_persistent(json.dumps(old_report), Path(old_root),
                                                  Path(new_warnings), Path(new_root),
                                                  require_new_pfp))
