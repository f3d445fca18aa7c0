import json
import os
from pathlib import Path

import pytest

import iocregex

ROOT = Path(os.environ.get("IOCREGEX_SOURCE_DIR", Path(__file__).resolve().parents[2]))
KB = ROOT / "data" / "windows_starter_kb.json"
FIXTURES = ROOT / "tests" / "fixtures"

PATH_IOC = r"C:\Users\Public\11.bat"


@pytest.fixture(scope="module")
def session():
    return iocregex.Session([KB])


def test_classify(session):
    assert session.classify(PATH_IOC) == "file_path"
    assert session.classify(r"HKCU\Software\Microsoft\Windows\CurrentVersion\Run") == "registry_key"
    assert session.classify("44d88612fea8a8f36de82e1278abb02f") == "other"


def test_annotate(session):
    a = session.annotate(PATH_IOC)
    assert a["sequences"] == [["Users", "Public"]]
    assert a["labels"] == ["discard", "keep", "keep", "discard"]
    assert len(session.annotate(PATH_IOC, bypass=True)["sequences"]) >= 1


def test_grade(session):
    g = session.grade(r"(?i).*Users\\Public\\.*", PATH_IOC)
    assert (g["n_cg"], g["n_wc"], g["score"]) == (2, 0, 2)
    with pytest.raises(Exception):
        session.grade("(unclosed", PATH_IOC)


def test_generate_and_evaluate(session):
    iocs = [entry["ioc"] for entry in json.loads((FIXTURES / "e2e" / "iocs.json").read_text())]
    out = session.generate(iocs, seed=3)
    s = out["summary"]
    assert s["inputs"] == len(iocs)
    assert s["inputs"] == s["excluded"] + s["rejected"] + s["processed"]
    assert out["exit_code"] == 0
    for p in out["products"]:
        assert iocregex.search(p["pattern"], p["normalized"])

    again = session.generate(iocs, seed=3, workers=2)
    assert again["products"] == out["products"]

    truths = json.loads((FIXTURES / "e2e" / "truths.json").read_text())
    report = session.evaluate(out["products"], truths)
    assert all(r["hit_rate"] >= 0.95 for r in report["reports"])


def test_single_shot_with_broken_replay(session, tmp_path):
    replay = tmp_path / "replay.json"
    replay.write_text(json.dumps({"emissions": ["(?i)Users\\\\(Public"]}))
    out = session.generate([PATH_IOC], mode="C-R", backend="scripted_mock", replay=replay)
    assert out["products"] == []
    assert out["exit_code"] == 2


def test_bad_arguments(session):
    with pytest.raises(ValueError):
        session.generate([PATH_IOC], mode="sideways")
    with pytest.raises(ValueError):
        session.generate([PATH_IOC], candidates=0)
    with pytest.raises(ValueError):
        iocregex.Session([ROOT / "missing.json"])


def test_helpers():
    assert iocregex.search("(?i)users", r"C:\USERS")
    assert not iocregex.search("^x$", "xy")
    assert iocregex.escape("a.b\\c") == "a\\.b\\\\c"
    assert iocregex.similarity("abc", "abd") == pytest.approx(2 / 3)
    assert iocregex.structural_similarity("(a)+", "[b]*") == pytest.approx(0.5)
