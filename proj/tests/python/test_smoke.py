import json
import shutil

import pytest

import slicefuzz
from conftest import CORPUS


def test_warning_id_is_a_function_of_location():
    a = slicefuzz.warning_id("ratslike", "src/driver.c", 12, "strcpy")
    assert a == slicefuzz.warning_id("ratslike", "src/driver.c", 12, "strcpy")
    assert a != slicefuzz.warning_id("ratslike", "src/driver.c", 13, "strcpy")
    assert a != slicefuzz.warning_id("inferlike", "src/driver.c", 12, "strcpy")
    with pytest.raises(slicefuzz.Error):
        slicefuzz.warning_id("nosuchtool", "a.c", 1, "x")


def test_load_warnings_matches_the_corpus_report():
    warnings, diags = slicefuzz.load_warnings(CORPUS / "warnings.jsonl", repo_root=CORPUS)
    lines = (CORPUS / "warnings.jsonl").read_text().splitlines()
    assert len(warnings) + len(diags) == len(lines)
    assert not diags
    first = json.loads(lines[0])
    assert (warnings[0]["file"], warnings[0]["line"]) == (first["file"], first["line"])


def test_classify_before_any_stage(tmp_path):
    with pytest.raises(slicefuzz.StageOrderError):
        slicefuzz.classify(tmp_path)


def test_run_glue_and_unresolvable(repo, manifest, tmp_path):
    picked = [f for f in manifest if f["role"] in ("glue", "unresolvable")]
    report_in = tmp_path / "w.jsonl"
    report_in.write_text("".join(
        json.dumps({"tool": "ratslike", "file": f["file"], "line": f["line"],
                    "category": f["category"], "severity": "High"}) + "\n" for f in picked))

    rc, report = slicefuzz.run(repo, report_in, tmp_path / "ws", build_cmd="make clean && make",
                               budget=5, seed=3)
    assert rc == 2
    assert report["overall"]["Total"] == 2
    by_fn = {r["function"]: r for r in report["rows"]}
    assert by_fn["glue_strings"]["state"] == "PFP"
    assert by_fn["glue_strings"]["rounds"] == 2
    nc = next(r for r in report["rows"] if r["state"] == "NC")
    assert nc["reason"] == "unresolved"

    again = slicefuzz.classify(tmp_path / "ws")
    assert [r["state"] for r in again["rows"]] == [r["state"] for r in report["rows"]]
    text = slicefuzz.report_text(report)
    assert "PFP" in text and "NC" in text


def test_persistence_v1_to_v2(tmp_path):
    v1 = tmp_path / "v1"
    shutil.copytree(CORPUS / "persistence" / "v1", v1)
    rc, report = slicefuzz.run(v1, v1 / "warnings.jsonl", tmp_path / "ws",
                               build_cmd="make clean && make", budget=5)
    assert rc == 0
    pfp = [r for r in report["rows"] if r["state"] == "PFP"]
    assert pfp
    same = slicefuzz.match_persistent(report, v1, v1 / "warnings.jsonl", v1)
    assert same["old_pfp"] == len(pfp) == same["matched"]

    v2 = CORPUS / "persistence" / "v2"
    moved = slicefuzz.match_persistent(report, v1, v2 / "warnings.jsonl", v2)
    assert moved["matched"] == len(pfp) - 2
    assert sorted(r["reason"] for r in moved["rows"] if "new" not in r) == ["line_deleted", "line_modified"]
