import json

import pytest

from organoquant.cli import main
from organoquant.ingest import ingest_raster_fallback


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_inspect(capsys, fixture_set):
    code, out, _ = run(capsys, "inspect", str(fixture_set / "WT1.czi"))
    doc = json.loads(out)
    assert code == 0 and [s["channel"] for s in doc["subblocks"]] == [0, 1, 2, 3]
    assert doc["segments"][0]["id"] == "ZISRAWFILE"


def test_extract(capsys, fixture_set, tmp_path):
    code, out, _ = run(capsys, "extract", str(fixture_set / "WT1.czi"), "--mapping", "N-cad=0,PAX6=1",
                       "--marker", "PAX6", "--output", str(tmp_path))
    assert code == 0
    img = ingest_raster_fallback((tmp_path / "WT1_PAX6.pgm").read_bytes())
    assert img.bit_depth == 16 and img.pixels.shape == (384, 384)


def test_contours_and_cells(capsys, fixture_set, tmp_path):
    cfg = str(fixture_set / "config.json")
    code, out, _ = run(capsys, "contours", str(fixture_set / "FKO1.czi"), "--config", cfg)
    assert code == 0 and json.loads(out)["total"] == 48
    code, out, _ = run(capsys, "cells", str(fixture_set / "WT1.czi"), "--config", cfg, "--output", str(tmp_path))
    assert code == 0
    pred = tmp_path / "WT1.instances.json"
    assert json.loads(pred.read_text())["summary"]["cell_count"] == 40
    code, out, _ = run(capsys, "eval", str(pred), str(fixture_set / "WT1.truth.json"))
    r = json.loads(out)
    assert code == 0 and r["tp"] == 40 and r["ap"] == 1.0


def test_blank_image_contours_print_inf(capsys, tmp_path):
    (tmp_path / "z.pgm").write_bytes(b"P5\n4 4\n255\n" + b"\0" * 16)
    code, out, _ = run(capsys, "contours", str(tmp_path / "z.pgm"))
    assert code == 0 and json.loads(out)["cr"] == "inf"


def test_error_exit_codes(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"groups": [{"name": "A", "files": ["x.czi"]}], "thetta": 1}))
    code, _, err = run(capsys, "run", "--config", str(bad), "--output", str(tmp_path / "o"))
    assert code == 2 and "UnknownKey" in err
    code, _, err = run(capsys, "inspect", str(tmp_path / "nope.czi"))
    assert code == 1
    (tmp_path / "junk.czi").write_bytes(b"\0" * 64)
    code, _, err = run(capsys, "inspect", str(tmp_path / "junk.czi"))
    assert code == 1 and "MalformedHeader" in err
    code, _, err = run(capsys, "extract", str(tmp_path / "junk.czi"))
    assert code == 2


def test_usage_error():
    with pytest.raises(SystemExit) as e:
        main(["frobnicate"])
    assert e.value.code == 2
