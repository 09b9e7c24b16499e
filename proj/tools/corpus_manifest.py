#!/usr/bin/env python3
"""Regenerates corpus/manifest.json and corpus/warnings.jsonl.

Juliet-style fixtures mark the flagged line with a comment on the line
above: /* FLAW ... */ in the *_bad function, /* FIX */ in the *_good one.
"""
import json
import pathlib
import re
import sys

CALLS = ("memcpy", "memmove", "memset", "strcpy", "strncpy", "strcat", "sprintf", "snprintf")


def category(line):
    for c in CALLS:
        if re.search(r"\b%s\s*\(" % c, line):
            return c
    return "array-index"


def enclosing(lines, idx):
    for i in range(idx, -1, -1):
        m = re.match(r"^[A-Za-z_][\w\s\*]*?\b(\w+)\s*\(", lines[i])
        if m and not lines[i].rstrip().endswith(";"):
            return m.group(1)
    raise SystemExit("no function above line %d" % (idx + 1))


def juliet(root):
    out = []
    for path in sorted((root / "juliet").glob("*.c")):
        lines = path.read_text().splitlines()
        for i, text in enumerate(lines):
            m = re.search(r"/\*\s*(FLAW|FIX)\b", text)
            if not m:
                continue
            fn = enclosing(lines, i)
            role = "bad" if m.group(1) == "FLAW" else "good"
            if not fn.endswith("_" + role):
                raise SystemExit("%s:%d marker %s inside %s" % (path, i + 1, m.group(1), fn))
            out.append({"file": str(path.relative_to(root)), "line": i + 2, "function": fn,
                        "role": role, "expect": "C" if role == "bad" else "PFP",
                        "category": category(lines[i + 1])})
    return out


SPECIAL = [
    {"file": "src/driver.c", "line": 16, "function": "glue_strings", "role": "glue", "expect": "PFP",
     "category": "strcpy"},
    {"file": "src/records.c", "line": 13, "function": "stash_record", "role": "globals", "expect": "PFP",
     "flags": ["globals"], "ground_truth": "TP", "category": "memcpy"},
    {"file": "src/checksum.c", "line": 13, "function": "frame_checksum", "role": "unresolvable", "expect": "NC",
     "reason": "unresolved", "category": "memcpy"},
    {"file": "src/asm_region.c", "line": 7, "function": "before_region", "role": "asm_neighbour", "expect": "PFP",
     "category": "array-index"},
]

# Filtered or merged during ingestion; never reach slicing.
EXTRA_RECORDS = [
    {"tool": "ratslike", "file": "src/driver.c", "line": 10, "category": "strlen", "severity": "Low"},
    {"tool": "inferlike", "file": "src/driver.c", "line": 16, "category": "strcpy", "severity": "L1"},
]


def function_spans(root):
    """Column-0 definitions closed by a column-0 brace (the corpus house style)."""
    out = {}
    for sub in ("src", "juliet"):
        for path in sorted((root / sub).glob("*.c")):
            lines = path.read_text().splitlines()
            spans = []
            for i, text in enumerate(lines):
                m = re.match(r"^(?!__asm__)[A-Za-z_][\w\s\*]*?\b(\w+)\s*\(", text)
                if not m or text.rstrip().endswith(";") or i + 1 >= len(lines) or lines[i + 1] != "{":
                    continue
                end = next(j for j in range(i + 1, len(lines)) if lines[j] == "}")
                spans.append({"name": m.group(1), "start": i + 1, "end": end + 1})
            out[str(path.relative_to(root))] = spans
    return out


def main():
    root = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else pathlib.Path(__file__).resolve().parent.parent / "corpus")
    entries = juliet(root) + SPECIAL
    for e in entries:
        text = (root / e["file"]).read_text().splitlines()[e["line"] - 1]
        e["text"] = text.strip()
    (root / "manifest.json").write_text(json.dumps({"build_cmd": "make clean && make", "fixtures": entries},
                                                   indent=2) + "\n")
    (root / "functions.json").write_text(json.dumps(function_spans(root), indent=1) + "\n")
    with open(root / "warnings.jsonl", "w") as f:
        for e in entries:
            sev = "High" if e["role"] in ("bad", "glue", "globals") else "Medium"
            f.write(json.dumps({"tool": "ratslike", "file": e["file"], "line": e["line"],
                                "category": e["category"], "severity": sev}) + "\n")
        for r in EXTRA_RECORDS:
            f.write(json.dumps(r) + "\n")


if __name__ == "__main__":
    main()
