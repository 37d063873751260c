import json
from pathlib import Path

import pytest

from torusnuh.cli import main
from torusnuh.config import ConfigError, RunConfig, load_config, parse_config

REF_CFG = str(Path(__file__).resolve().parents[1] / "configs" / "reference.cfg")


def body(path: Path) -> str:
    return "".join(l for l in path.read_text().splitlines(True) if not l.startswith("#"))


def test_parse_config():
    cfg = parse_config("matrix = 2 1 1 1  # cat map\nt = 5\n")
    assert cfg.matrix == (2, 1, 1, 1) and cfg.t == 5.0
    with pytest.raises(ConfigError):
        parse_config("nonsense = 1\n")
    with pytest.raises(ConfigError):
        parse_config("delta_mode = sometimes\n")


def test_reference_config_and_hash():
    cfg = load_config(REF_CFG)
    assert cfg.E.rows() == ((3, 4), (0, 1))
    assert cfg.hash() == load_config(REF_CFG).hash()
    assert cfg.hash() != cfg.with_overrides(seed=1).hash()
    assert cfg.delta_for(1e3) == pytest.approx(1e-7)
    assert "seed" in cfg.provenance()


def test_missing_profile_is_config_error():
    with pytest.raises(ConfigError):
        RunConfig(profile="none").spec()


def test_divisors(tmp_path, capsys):
    assert main(["divisors", "--config", REF_CFG, "--out", str(tmp_path)]) == 0
    assert "tau1=1, tau2=3, d=3" in capsys.readouterr().out
    assert "has_pm1_eigenvalue" in (tmp_path / "divisors.csv").read_text()
    cfg = tmp_path / "h.cfg"
    cfg.write_text("matrix = 2 0 0 2\n")
    assert main(["divisors", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    cfg.write_text("matrix = 1 2 2 4\n")
    assert main(["divisors", "--config", str(cfg), "--out", str(tmp_path)]) == 1


def test_certify_reference(tmp_path):
    assert main(["certify", "--config", REF_CFG, "--out", str(tmp_path)]) == 0
    cert = json.loads((tmp_path / "certificate.json").read_text())
    assert cert["verdict"] == "Proven" and len(cert["children"]) == 7


def test_certify_negative_control(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(Path(REF_CFG).read_text() + "t = 1\n")
    assert main(["certify", "--config", str(cfg), "--out", str(tmp_path)]) == 3
    cert = json.loads((tmp_path / "certificate.json").read_text())
    assert "cone estimates" in cert["witness"]["stage"]


def test_combinatorics_command(tmp_path):
    assert main(["combinatorics", "--config", REF_CFG, "--out", str(tmp_path),
                 "--tau2-max", "20"]) == 0
    lines = body(tmp_path / "combinatorics.csv").splitlines()
    assert len(lines) == 19
    assert "7/13" in lines[1]


def test_bad_usage(tmp_path):
    assert main(["certify", "--config", str(tmp_path / "missing.cfg")]) == 1
    with pytest.raises(SystemExit):
        main(["frobnicate"])
