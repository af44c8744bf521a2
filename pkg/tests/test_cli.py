import csv
import io
from pathlib import Path

import pytest

from lpdense.bench import read_records
from lpdense.cli import main

from test_mps import DATA, MINIMAL

DENSE = ["--dense-frac", "0.3", "--dense-min", "5", "--dense-force"]


@pytest.fixture
def toy_files(tmp_path):
    paths = []
    for seed in (1, 2):
        p = tmp_path / f"toy{seed}.mps"
        assert main(["gen", str(p), "--rows", "20", "--cols", "40", "--seed", str(seed)]) == 0
        paths.append(p)
    return paths


def test_solve_tiny(tmp_path, capsys):
    p = tmp_path / "tiny.mps"
    p.write_text(MINIMAL)
    assert main(["solve", str(p), "--strategy", "proposed"]) == 0
    out = capsys.readouterr().out
    assert "Optimal" in out
    assert "objective    1\n" in out


def test_solve_writes_csv_and_trace(toy_files, tmp_path):
    csv_path = tmp_path / "run.csv"
    trace = tmp_path / "trace.csv"
    assert main(["solve", str(toy_files[0]), *DENSE, "--csv", str(csv_path), "--trace", str(trace)]) == 0
    (r,) = read_records(csv_path.open())
    assert r.optimal and r.ndense == 1
    rows = list(csv.DictReader(trace.open()))
    assert len(rows) == r.ipm_iterations
    assert float(rows[-1]["mu"]) < float(rows[0]["mu"])


def test_full_and_proposed_agree(toy_files, tmp_path):
    objs = {}
    for s in ("full", "proposed"):
        out = tmp_path / f"{s}.csv"
        assert main(["solve", str(toy_files[1]), "--strategy", s, *DENSE, "--csv", str(out)]) == 0
        objs[s] = read_records(out.open())[0].objective
    assert objs["full"] == pytest.approx(objs["proposed"], rel=1e-6)


def test_exit_codes(tmp_path, capsys):
    assert main(["solve", str(tmp_path / "missing.mps")]) == 1
    bad = tmp_path / "bad.mps"
    bad.write_text("ROWS\n Q R1\nENDATA\n")
    assert main(["solve", str(bad)]) == 1
    with pytest.raises(SystemExit) as info:
        main(["solve"])
    assert info.value.code == 1
    infeasible = tmp_path / "inf.mps"
    infeasible.write_text(MINIMAL.replace("R1        1.0\nENDATA", "R1        -1.0\nENDATA"))
    assert main(["solve", str(infeasible), "--max-iter", "50"]) == 2


def test_compare_rows_sorted_and_isolated(toy_files, tmp_path):
    out = tmp_path / "cmp.csv"
    paths = [str(toy_files[1]), str(tmp_path / "nope.mps"), str(toy_files[0])]
    assert main(["compare", *paths, *DENSE, "--csv", str(out)]) == 0
    recs = read_records(out.open())
    assert len(recs) == 9
    assert [(r.problem, r.strategy) for r in recs] == sorted((r.problem, r.strategy) for r in recs)
    assert [r.termination for r in recs if r.problem == "nope"] == ["Error"] * 3
    assert all(r.optimal for r in recs if r.problem.startswith("toy") and r.strategy != "smw")


def test_compare_two_problems_three_strategies(toy_files, capsys):
    assert main(["compare", *map(str, toy_files), *DENSE]) == 0
    recs = read_records(io.StringIO(capsys.readouterr().out))
    assert len(recs) == 6


def test_compare_is_deterministic_apart_from_time(toy_files, tmp_path):
    texts = []
    for i in range(2):
        out = tmp_path / f"c{i}.csv"
        main(["compare", *map(str, toy_files), *DENSE, "--csv", str(out)])
        rows = list(csv.reader(out.open()))
        col = rows[0].index("wall_time")
        texts.append([r[:col] + r[col + 1:] for r in rows])
    assert texts[0] == texts[1]


def test_compare_parallel_matches_serial(toy_files, tmp_path):
    outs = []
    for jobs in ("1", "2"):
        out = tmp_path / f"j{jobs}.csv"
        main(["compare", *map(str, toy_files), *DENSE, "--jobs", jobs, "--csv", str(out)])
        outs.append([(r.problem, r.strategy, r.objective) for r in read_records(out.open())])
    assert outs[0] == outs[1]


def test_compare_needs_two_strategies(toy_files):
    assert main(["compare", str(toy_files[0]), "--strategies", "full"]) == 1


def test_deficient_problem_compare(tmp_path):
    p = tmp_path / "deficient.mps"
    assert main(["gen", str(p), "--rows", "40", "--cols", "80", "--ndense", "2",
                 "--deficient-rows", "1", "--seed", "2"]) == 0
    out = tmp_path / "d.csv"
    main(["compare", str(p), *DENSE, "--csv", str(out)])
    recs = {r.strategy: r for r in read_records(out.open())}
    assert recs["proposed"].d > 0 and recs["proposed"].optimal
    assert recs["smw"].termination in ("Optimal", "Unknown")


def test_profile_from_compare(toy_files, tmp_path, capsys):
    out = tmp_path / "cmp.csv"
    main(["compare", *map(str, toy_files), *DENSE, "--csv", str(out)])
    capsys.readouterr()
    assert main(["profile", str(out)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "strategy,log2_ratio,fraction"
    assert {l.split(",")[0] for l in lines[1:]} <= {"full", "proposed", "smw"}


def test_profile_malformed(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("nonsense\n")
    assert main(["profile", str(p)]) == 1


def test_gen_gzip_is_reproducible(tmp_path):
    a, b = tmp_path / "a.mps.gz", tmp_path / "b.mps.gz"
    main(["gen", str(a), "--seed", "3"])
    main(["gen", str(b), "--seed", "3"])
    assert a.read_bytes() == b.read_bytes()
    assert main(["gen", str(a), "--rows", "10", "--cols", "5"]) == 1


@pytest.mark.slow
def test_solve_fit1p_cli(capsys):
    code = main(["solve", str(DATA / "fit1p.mps.gz"), "--strategy", "proposed", "--dense-frac", "0.3",
                 "--dense-min", "10", "--dense-force"])
    out = capsys.readouterr().out
    assert code == 0
    ndense = int(out.split("ndense=")[1].split()[0])
    assert ndense > 0
