import json

import pytest

from hyperreg.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def lines(text):
    return [json.loads(x) for x in text.splitlines() if x.strip()]


def test_sample_d1(capsys):
    code, out, _ = run(capsys, "sample", "-n", "6", "-d", "1", "-k", "3", "--count", "3", "--seed", "7", "--mode", "exact")
    assert code == 0
    rows = lines(out)
    meta = rows[0]["meta"]
    assert meta["seed"] == 7 and meta["params"] == {"n": 6, "d": 1, "k": 3} and meta["l_policy"] == "sqrt"
    assert meta["delta1_source"] == "formula" and meta["mode"] == "exact"
    assert len(rows) == 4
    for r in rows[1:]:
        a, b = r["edges"]
        assert len(a) == len(b) == 3 and not set(a) & set(b)


def test_sample_is_byte_identical_for_same_seed(capsys):
    argv = ("sample", "-n", "9", "-d", "2", "-k", "3", "--count", "3", "--seed", "11", "--delta1", "1")
    _, a, _ = run(capsys, *argv)
    _, b, _ = run(capsys, *argv)
    assert a == b


def test_jobs_do_not_change_output(capsys):
    argv = ("sample", "-n", "9", "-d", "2", "-k", "3", "--count", "4", "--seed", "3", "--delta1", "1")
    _, a, _ = run(capsys, *argv)
    _, b, _ = run(capsys, *argv, "--jobs", "2")
    assert a == b


def test_generated_seed_is_printed(capsys):
    code, out, err = run(capsys, "sample", "-n", "6", "-d", "1", "-k", "3")
    assert code == 0
    seed = int(err.split("seed:")[1])
    assert lines(out)[0]["meta"]["seed"] == seed


def test_sample_permutation_and_trace(capsys, tmp_path):
    code, out, _ = run(capsys, "sample", "-n", "3", "-d", "2", "-k", "3", "--permutation", "--count", "2", "--seed", "1")
    assert code == 0
    perms = lines(out)[1:]
    assert len(perms) == 2 and sorted(perms[0]) == [1, 1, 2, 2, 3, 3]
    trace = tmp_path / "trace.json"
    code, _, _ = run(capsys, "sample", "-n", "9", "-d", "2", "-k", "3", "--seed", "1", "--delta1", "1", "--trace", str(trace))
    data = json.loads(trace.read_text())
    assert code == 0 and len(data["traces"]) == 1 and data["traces"][0]["attempts"] >= 1


def test_approx_flagged(capsys):
    code, out, _ = run(capsys, "sample", "-n", "9", "-d", "2", "-k", "3", "--seed", "1", "--mode", "approx")
    assert code == 0 and lines(out)[0]["meta"]["approximate"] is True


def test_enumerate_and_formula(capsys, tmp_path):
    code, out, _ = run(capsys, "enumerate", "-n", "6", "-d", "1", "-k", "3")
    assert code == 0 and lines(out)[0]["exact_count"] == 10
    emit = tmp_path / "all.jsonl"
    run(capsys, "enumerate", "-n", "6", "-d", "2", "-k", "3", "--emit", str(emit))
    assert len(emit.read_text().splitlines()) == 75
    code, out, _ = run(capsys, "formula", "-n", "6", "-d", "1", "-k", "3")
    rec = lines(out)[0]
    assert code == 0 and rec["estimate"] == 10 and rec["ratio"] == 1


def test_compare(capsys):
    code, out, _ = run(capsys, "compare", "-n", "4", "-d", "3", "-k", "3")
    rec = lines(out)[0]
    assert code == 0 and rec["E_0"] == 31104 and rec["level_ratios"][0]["reference"] == 2.0


def test_verify_identity_and_bounds(capsys):
    code, out, _ = run(capsys, "verify", "identity", "-n", "4", "-d", "3", "-k", "3")
    rec = lines(out)[0]
    assert code == 0 and rec["all_equal"]
    assert [r["status"] for r in rec["identity"]] == ["exact-equal"] * 3
    code, out, _ = run(capsys, "verify", "bounds", "-n", "3", "-d", "2", "-k", "3", "--method", "permutations")
    assert code == 0 and lines(out)[0]["F_violations"] == 0


def test_verify_ratio_and_uniformity(capsys):
    code, out, _ = run(capsys, "verify", "ratio", "-n", "6", "-d", "2", "-k", "3")
    assert code == 0 and lines(out)[0]["rows"][1]["ratio"]["exact"] == "1/2"
    code, out, _ = run(capsys, "verify", "uniformity", "-n", "6", "-d", "1", "-k", "3", "--seed", "2")
    rec = lines(out)[0]
    assert code == 0 and rec["classes"] == 10 and rec["N"] == 1000


def test_stats(capsys):
    code, out, _ = run(capsys, "stats", "lambda", "-n", "4", "-d", "3", "-k", "3", "--exhaustive")
    rec = lines(out)[0]
    assert code == 0 and rec["good_loop_mean"]["exact"] == "108/55"
    for what in ("prob-e", "collision", "tail"):
        code, out, _ = run(capsys, "stats", what, "-n", "30", "-d", "3", "-k", "3", "--samples", "500", "--seed", "1")
        assert code == 0 and lines(out)[0]["N"] == 500


def test_switch_count(capsys):
    y = "[1,1,2,3,4,5,6,7,8,2,3,6,4,7,9,5,8,9]"
    code, out, _ = run(capsys, "switch-count", "-n", "9", "-d", "2", "-k", "3", "--perm", y, "--explain")
    rec = lines(out)[0]
    assert code == 0 and rec["level"] == 1 and rec["F"] == len(rec["forward_ops"]) > 0
    assert rec["F_l"] == 324


@pytest.mark.parametrize(
    "argv,code",
    [
        (("sample", "-n", "5", "-d", "2", "-k", "3", "--seed", "1"), 1),
        (("sample", "-n", "9", "-d", "2", "-k", "3", "--seed", "1"), 1),
        (("sample", "-n", "3", "-d", "2", "-k", "3", "--seed", "1", "--mode", "approx", "--budget", "5"), 2),
        (("verify", "identity", "-n", "9", "-d", "2", "-k", "3"), 2),
        (("enumerate", "-n", "40", "-d", "3", "-k", "3", "--subset-guard", "100"), 2),
        (("switch-count", "-n", "3", "-d", "2", "-k", "3", "--perm", "[1,1,1,2,2,3]"), 1),
    ],
)
def test_exit_codes(capsys, argv, code):
    assert run(capsys, *argv)[0] == code
