import subprocess
import sys

import numpy as np
import pytest

from pricetag.cli import EXIT_ACCEPTED, EXIT_ERROR, EXIT_REJECTED, main, parse_mix
from pricetag.ocr import Price
from pricetag.pnm import write_image
from pricetag.synthgen import TagSpec, render_tag


@pytest.fixture(scope="module")
def images(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    img, _ = render_tag(TagSpec(1, Price(4550, 2), 1000, 500), 8)
    write_image(d / "tag.ppm", img)
    write_image(d / "blank.ppm", np.full((400, 800, 3), 255, np.uint8))
    (d / "junk.ppm").write_bytes(b"nope")
    return d


def test_parse_mix():
    assert parse_mix("blur=0.1, angle=0.2,clean=0.7") == {"blur": 0.1, "angle": 0.2}
    for bad in ("blur", "blur=x"):
        with pytest.raises(Exception):
            parse_mix(bad)


def test_recognize_exit_codes(images, capsys, tmp_path):
    assert main(["recognize", str(images / "tag.ppm")]) == EXIT_ACCEPTED
    assert capsys.readouterr().out.strip() == "45.50"
    assert main(["recognize", str(images / "blank.ppm")]) == EXIT_REJECTED
    assert capsys.readouterr().out.startswith("REJECT ")
    assert main(["recognize", str(images / "junk.ppm")]) == EXIT_ERROR
    assert main(["recognize", str(images / "missing.ppm")]) == EXIT_ERROR
    assert main(["recognize", str(images / "tag.ppm"), "--debug-dir", str(tmp_path / "dbg")]) == EXIT_ACCEPTED
    assert (tmp_path / "dbg" / "zone.ppm").exists()


def test_bad_config_is_an_error(images, tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"niblack": 1}')
    assert main(["recognize", str(images / "tag.ppm"), "--config", str(cfg)]) == EXIT_ERROR
    assert "unknown key" in capsys.readouterr().err


def test_gen_batch_bench(tmp_path, capsys):
    out = tmp_path / "data"
    assert main(["gen", "--n", "4", "--seed", "2", "--out", str(out), "--mix", "absent=0.25,angle=0.25"]) == 0
    manifest = out / "manifest.csv"
    assert manifest.exists() and len(list(out.glob("*.ppm"))) == 4
    results = tmp_path / "results.csv"
    assert main(["batch", str(manifest), "--out", str(results), "--no-timing"]) == 0
    assert "precision=" in capsys.readouterr().out
    assert len(results.read_text().splitlines()) == 5
    assert main(["bench", str(manifest), "--reps", "3", "--limit", "1", "--single-thread"]) == 0
    assert "end-to-end" in capsys.readouterr().out


def test_module_entry_point(images):
    proc = subprocess.run(
        [sys.executable, "-m", "pricetag", "recognize", str(images / "tag.ppm")], capture_output=True, text=True
    )
    assert proc.returncode == 0 and proc.stdout.strip() == "45.50"
