import filecmp
import io
import os
import subprocess
import sys
from contextlib import redirect_stderr, redirect_stdout

import pytest

from csdlm.arpa import read_arpa
from csdlm.cli import main
from csdlm.corpus import read_corpus
from csdlm.dlm import load_dlm, perplexity, train_dlm, train_mixed

from conftest import TOY_LINES

HERE = os.path.dirname(os.path.abspath(__file__))


def run(*argv, env_seed=None, monkeypatch=None):
    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        rc = main([str(a) for a in argv])
    return rc, out.getvalue(), err.getvalue()


@pytest.fixture
def toy_files(tmp_path):
    (tmp_path / "toy.txt").write_text("\n".join(TOY_LINES) + "\n", encoding="utf-8")
    (tmp_path / "ab.txt").write_text("a|L1 b|L1\n", encoding="utf-8")
    return tmp_path


def _toy_pipeline(d, smoothing="mle"):
    assert run("train-mono", "--keep", "L1", "--smoothing", smoothing, "--in", d / "toy.txt", "--out", d / "lm1.arpa")[0] == 0
    assert run("train-mono", "--keep", "L2", "--smoothing", smoothing, "--in", d / "toy.txt", "--out", d / "lm2.arpa")[0] == 0
    assert run("combine", "--lm1", d / "lm1.arpa", "--lm2", d / "lm2.arpa", "--out", d / "dlm")[0] == 0
    assert run("train-mixed", "--smoothing", smoothing, "--in", d / "toy.txt", "--out", d / "mixed.arpa")[0] == 0


def test_toy_golden_ppl(toy_files):
    _toy_pipeline(toy_files)
    rc, out, _ = run("ppl", "--model", toy_files / "dlm", "--eval", toy_files / "ab.txt")
    assert rc == 0
    with open(os.path.join(HERE, "golden", "toy_ppl_ab.txt"), encoding="utf-8") as f:
        assert out == f.read()


def test_train_mono_writes_readable_arpa(toy_files):
    rc = run("train-mono", "--keep", "L1", "--smoothing", "kn", "--in", toy_files / "toy.txt", "--out", toy_files / "lm1.arpa")[0]
    assert rc == 0
    assert read_arpa(toy_files / "lm1.arpa").smoothing == "kn"


def test_train_mono_from_derived_file(toy_files):
    assert run("derive", "--keep", "L1", "--in", toy_files / "toy.txt", "--out", toy_files / "d1.txt")[0] == 0
    assert (toy_files / "d1.txt").read_text(encoding="utf-8") == "a b\na <sw>\n<sw> a\n"
    run("train-mono", "--keep", "L1", "--in", toy_files / "d1.txt", "--derived", "--out", toy_files / "x.arpa")
    run("train-mono", "--keep", "L1", "--in", toy_files / "toy.txt", "--out", toy_files / "y.arpa")
    assert filecmp.cmp(toy_files / "x.arpa", toy_files / "y.arpa", shallow=False)


def test_combine_then_validate(toy_files):
    _toy_pipeline(toy_files, "kn")
    rc, out, _ = run("validate", toy_files / "dlm")
    assert rc == 0 and out == "violations=0\n"
    manifest = (toy_files / "dlm" / "manifest").read_text(encoding="utf-8")
    assert "enforced=true" in manifest and "smoothing=kn" in manifest


def test_validate_reports_planted_defect(toy_files):
    _toy_pipeline(toy_files)
    arpa = toy_files / "dlm" / "lm1.arpa"
    text = arpa.read_text(encoding="utf-8").replace("-99.0000000\t<sw> <sw>", "-1.0000000\t<sw> <sw>")
    arpa.write_text(text, encoding="utf-8")
    rc, out, _ = run("validate", toy_files / "dlm")
    assert rc == 1 and "condition=3\tmodel=L1\thistory=<sw>\tresidual=1.000000e-01" in out


def test_ppl_matches_library_twin(toy_files):
    _toy_pipeline(toy_files, "kn")
    for model in ("dlm", "mixed.arpa"):
        rc, out, _ = run("ppl", "--model", toy_files / model, "--eval", toy_files / "toy.txt", "--split", "test")
        loaded = load_dlm(toy_files / model) if model == "dlm" else read_arpa(toy_files / model)
        twin = perplexity(loaded, read_corpus(toy_files / "toy.txt"), split="test").to_text()
        assert rc == 0 and out == twin


def test_compare_toy(toy_files):
    _toy_pipeline(toy_files)
    rc, out, _ = run("compare", "--mixed", toy_files / "mixed.arpa", "--dlm", toy_files / "dlm", "--eval", toy_files / "toy.txt")
    lines = out.splitlines()
    assert rc == 0 and lines[0] == "sentence\tmixed_ppl\tdlm_ppl"
    assert lines[2].startswith("a x\t") and lines[2].endswith("\t2.080084")
    rc, out, _ = run("compare", "--summary", "--mixed", toy_files / "mixed.arpa", "--dlm", toy_files / "dlm", "--eval", toy_files / "toy.txt")
    assert out.count("ppl=") == 2 and "model=mixed" in out and "model=dlm" in out


def test_usage_errors_exit_2(toy_files):
    assert run("ppl", "--model", "x")[0] == 2
    assert run("ppl", "--model", "x", "--eval", "y", "--bogus")[0] == 2
    assert run("nosuch")[0] == 2
    assert run("train-mono", "--keep", "L3", "--in", "x", "--out", "y")[0] == 2
    assert run("split", "--in", "x", "--out-dir", "y", "--seed", "1", "--fractions", "0.5", "0.2", "0.2")[0] == 2


def test_seed_required(toy_files, monkeypatch):
    _toy_pipeline(toy_files)
    monkeypatch.delenv("CSDLM_SEED", raising=False)
    rc, _, err = run("sample", "--model", toy_files / "dlm", "--n", "3")
    assert rc == 2 and "--seed" in err
    monkeypatch.setenv("CSDLM_SEED", "4")
    from_env = run("sample", "--model", toy_files / "dlm", "--n", "20")
    from_flag = run("sample", "--model", toy_files / "dlm", "--n", "20", "--seed", "4")
    assert from_env[0] == 0 and from_env[1] == from_flag[1]
    other = run("sample", "--model", toy_files / "dlm", "--n", "20", "--seed", "5")
    assert other[1] != from_flag[1]


def test_domain_errors_exit_1(toy_files):
    rc, _, err = run("ppl", "--model", toy_files / "missing", "--eval", toy_files / "ab.txt")
    assert rc == 1 and "error" in err
    (toy_files / "bad.txt").write_text("a|L1 b\n", encoding="utf-8")
    rc, _, err = run("train-mixed", "--in", toy_files / "bad.txt", "--out", toy_files / "m.arpa")
    assert rc == 1 and ":1:" in err


def test_preprocess(tmp_path):
    (tmp_path / "raw.txt").write_text(
        "s1\t我们 的 total\ns1\t[laugh] ok\ns2\tso <unk>\ns2\tabso- lutely\ns3\tbleach跟 ok\n", encoding="utf-8"
    )
    rc, out, _ = run("preprocess", "--in", tmp_path / "raw.txt", "--out", tmp_path / "t.txt", "--tagger", "script")
    assert rc == 0
    assert out == "kept=1\ndropped=4\nunk=1\nmixed_script=1\nincomplete=1\npattern=1\n"
    assert (tmp_path / "t.txt").read_text(encoding="utf-8") == "s1\t我们|L1 的|L1 total|L2\n"


def test_preprocess_suffix_filters_on_surface(tmp_path):
    (tmp_path / "raw.txt").write_text("a|L1 <unk>|L2\na|L1 x|L2\n", encoding="utf-8")
    rc, out, _ = run("preprocess", "--in", tmp_path / "raw.txt", "--out", tmp_path / "t.txt")
    assert rc == 0 and out.startswith("kept=1\ndropped=1\nunk=1\n")


def test_split_and_synth(tmp_path):
    assert run("synth", "--n", 300, "--speakers", 6, "--seed", 3, "--out", tmp_path / "c.txt")[0] == 0
    rc, out, _ = run("split", "--in", tmp_path / "c.txt", "--out-dir", tmp_path / "s", "--seed", 1)
    assert rc == 0 and out.count("utterances=") == 3
    sizes = [len(read_corpus(tmp_path / "s" / f"{n}.txt")) for n in ("train", "dev", "test")]
    assert sum(sizes) == 300


def test_analyze_outputs(toy_files):
    _toy_pipeline(toy_files)
    rc = run("analyze", "--in", toy_files / "toy.txt", "--out-dir", toy_files / "an", "--mixed", toy_files / "mixed.arpa", "--dlm", toy_files / "dlm")[0]
    assert rc == 0
    names = sorted(os.listdir(toy_files / "an"))
    assert names == ["freq_fraction_order1.tsv", "sentence_ppl.tsv", "switch_stats.tsv"]
    stats = (toy_files / "an" / "switch_stats.tsv").read_text(encoding="utf-8")
    assert "fraction_singleton\t1.000000\n" in stats
    assert run("analyze", "--in", toy_files / "toy.txt", "--out-dir", toy_files / "x", "--mixed", toy_files / "mixed.arpa")[0] == 2


def test_export_commands(toy_files):
    _toy_pipeline(toy_files, "kn")
    rc, out, _ = run("export-fst", "--model", toy_files / "dlm", "--out", toy_files / "m.fst")
    assert rc == 0 and out.startswith("states=5\n")
    assert (toy_files / "m.fst.syms").read_text(encoding="utf-8").startswith("<eps>\t0\n")
    assert run("export-arpa", "--model", toy_files / "dlm", "--out", toy_files / "flat.arpa")[0] == 0
    flat = read_arpa(toy_files / "flat.arpa")
    dlm = load_dlm(toy_files / "dlm")
    assert flat.prob("a", "x") == pytest.approx(dlm.prob("a", "x"), rel=1e-5)
    assert run("export-arpa", "--model", toy_files / "mixed.arpa", "--out", toy_files / "f2.arpa")[0] == 1


def _full_pipeline(d):
    steps = [
        ("synth", "--n", 400, "--speakers", 8, "--seed", 11, "--out", d / "c.txt", "--save-truth", d / "truth"),
        ("split", "--in", d / "c.txt", "--out-dir", d / "s", "--seed", 2),
        ("train-mono", "--keep", "L1", "--in", d / "s" / "train.txt", "--out", d / "lm1.arpa"),
        ("train-mono", "--keep", "L2", "--in", d / "s" / "train.txt", "--out", d / "lm2.arpa"),
        ("combine", "--lm1", d / "lm1.arpa", "--lm2", d / "lm2.arpa", "--out", d / "dlm", "--seed", 2),
        ("train-mixed", "--in", d / "s" / "train.txt", "--out", d / "mixed.arpa"),
        ("validate", d / "dlm"),
        ("ppl", "--model", d / "dlm", "--eval", d / "s" / "test.txt", "--out", d / "ppl_dlm.txt"),
        ("ppl", "--model", d / "mixed.arpa", "--eval", d / "s" / "test.txt", "--out", d / "ppl_mixed.txt"),
        ("compare", "--mixed", d / "mixed.arpa", "--dlm", d / "dlm", "--eval", d / "s" / "test.txt", "--out", d / "cmp.tsv"),
        ("sample", "--model", d / "dlm", "--n", 50, "--seed", 9, "--out", d / "samples.txt"),
        ("export-fst", "--model", d / "dlm", "--out", d / "dlm.fst"),
        ("export-arpa", "--model", d / "dlm", "--out", d / "flat.arpa"),
        ("analyze", "--in", d / "s" / "train.txt", "--out-dir", d / "an", "--mixed", d / "mixed.arpa", "--dlm", d / "dlm"),
    ]
    outputs = []
    for step in steps:
        rc, out, err = run(*step)
        assert rc == 0, (step, err)
        outputs.append(out)
    return outputs


def _tree(root):
    files = {}
    for dirpath, _, names in os.walk(root):
        for n in names:
            p = os.path.join(dirpath, n)
            with open(p, "rb") as f:
                files[os.path.relpath(p, root)] = f.read()
    return files


def test_full_pipeline_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir()
    b.mkdir()
    assert _full_pipeline(a) == _full_pipeline(b)
    ta, tb = _tree(a), _tree(b)
    assert ta.keys() == tb.keys() and len(ta) > 15
    assert all(ta[k] == tb[k] for k in ta)


def test_console_script_entry_point(toy_files):
    proc = subprocess.run(
        [sys.executable, "-m", "csdlm.cli", "ppl", "--model", "nope"], capture_output=True, text=True
    )
    assert proc.returncode == 2
