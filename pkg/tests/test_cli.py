import io
import json
import math

import pytest

from qetsim.cli import main
from qetsim.isa import parse_program

PHYSICAL_OK = ("QPU s=2\n"
               "INIT m0 0\nINIT m1 1\n"
               "LOAD m0 c1\nLOAD m1 c2\n"
               "QET 3.141592653589793\n"
               "SAVE c1 m0\nSAVE c2 m1\n"
               "MEASURE m0\nMEASURE m1\n")

LOGICAL_PLUS = ("LQ n=1\n"
                "RX 1.5707963267948966 q0\n"
                "MEASURE q0\n")


def _write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_validate_ok(tmp_path, capsys):
    path = _write(tmp_path, "ok.qpu", PHYSICAL_OK)
    assert main(["validate", path]) == 0
    assert "ok" in capsys.readouterr().out


def test_validate_missing_theta_cites_line(tmp_path, capsys):
    path = _write(tmp_path, "bad.qpu", "QPU s=1\nINIT m0 0\nQET\nMEASURE m0\n")
    assert main(["validate", path]) == 1
    out = capsys.readouterr().out
    assert "line 3" in out and "theta" in out


def test_validate_unknown_opcode(tmp_path, capsys):
    path = _write(tmp_path, "bad2.qpu", "QPU s=1\nFROB m0\n")
    assert main(["validate", path]) == 1


def test_validate_semantic_issue_cites_line(tmp_path, capsys):
    path = _write(tmp_path, "sem.qpu", "QPU s=1\nMEASURE m0\n")
    assert main(["validate", path]) == 1
    assert "line 2" in capsys.readouterr().out


def test_validate_logical_file(tmp_path, capsys):
    path = _write(tmp_path, "prog.lq", LOGICAL_PLUS)
    assert main(["validate", path]) == 0


def test_validate_unreadable_file(capsys):
    assert main(["validate", "/nonexistent/prog.qpu"]) == 1


def test_run_deterministic_zeros(tmp_path, capsys):
    path = _write(tmp_path, "init.qpu", "QPU s=1\nINIT m0 0\nMEASURE m0\n")
    assert main(["run", path, "--shots", "5", "--output", "machine"]) == 0
    records = [json.loads(line)
               for line in capsys.readouterr().out.strip().splitlines()]
    shots = [r for r in records if r["type"] == "shot"]
    assert len(shots) == 5
    assert all(r["results"] == [{"qubit": 0, "bit": 0}] for r in shots)
    aggregate = records[-1]
    assert aggregate == {"type": "aggregate", "shots": 5, "counts": {"0": 5}}


def test_run_same_seed_identical_output(tmp_path, capsys):
    path = _write(tmp_path, "prog.qpu", PHYSICAL_OK)
    main(["run", path, "--seed", "9", "--shots", "20", "--output", "machine"])
    first = capsys.readouterr().out
    main(["run", path, "--seed", "9", "--shots", "20", "--output", "machine"])
    second = capsys.readouterr().out
    assert first == second


def test_run_logical_program_balanced(tmp_path, capsys):
    path = _write(tmp_path, "plus.lq", LOGICAL_PLUS)
    assert main(["run", path, "--shots", "400", "--seed", "3",
                 "--output", "machine"]) == 0
    records = [json.loads(line)
               for line in capsys.readouterr().out.strip().splitlines()]
    aggregate = records[-1]
    zeros = sum(count for key, count in aggregate["counts"].items()
                if key[0] == "0")
    assert 0.4 <= zeros / 400 <= 0.6


def test_run_runtime_error_reports_index(tmp_path, capsys):
    path = _write(tmp_path, "broken.qpu", "QPU s=1\nINIT m0 0\nINIT m0 0\n")
    assert main(["run", path]) == 1
    assert "instruction 1" in capsys.readouterr().err


def test_compile_rx_program(tmp_path, capsys):
    path = _write(tmp_path, "rx.lq", "LQ n=1\nRX 3.141592653589793 q0\n")
    assert main(["compile", path]) == 0
    out = capsys.readouterr().out
    qet_lines = [line for line in out.splitlines() if line.startswith("QET")]
    assert len(qet_lines) == 1
    assert math.isclose(float(qet_lines[0].split()[1]), -math.pi)
    # the emitted text reparses and validates
    reparsed = parse_program(out)
    assert reparsed.s == 2


def test_compile_cnot_census(tmp_path, capsys):
    path = _write(tmp_path, "cnot.lq",
                  "LQ n=2\nCNOT q0 q1\nMEASURE q0\nMEASURE q1\n")
    assert main(["compile", path]) == 0
    out = capsys.readouterr().out
    assert sum(line.startswith("CQET") for line in out.splitlines()) == 1


def test_compile_empty_program(tmp_path, capsys):
    path = _write(tmp_path, "empty.lq", "LQ n=0\n")
    assert main(["compile", path]) == 0
    assert capsys.readouterr().out.strip() == "QPU s=0"


def test_compile_roundtrip_instruction_lists(tmp_path, capsys):
    path = _write(tmp_path, "mix.lq",
                  "LQ n=2\nRX 0.7 q0\nRZ -1.1 q1\nCNOT q1 q0\n"
                  "MEASURE q0\nMEASURE q1\n")
    main(["compile", path])
    text = capsys.readouterr().out
    assert parse_program(text) == parse_program(text)
    second = _write(tmp_path, "mix.qpu", text)
    assert main(["validate", second]) == 0
    capsys.readouterr()


def test_protocol_verify_ideal(capsys):
    assert main(["protocol-verify", "--samples", "20",
                 "--output", "machine"]) == 0
    records = [json.loads(line)
               for line in capsys.readouterr().out.strip().splitlines()]
    steps = [r for r in records if r["type"] == "step"]
    assert len(steps) == 12
    assert all(abs(r["fidelity"] - 1) < 1e-9 for r in steps)
    summary = records[-1]
    assert summary["transfer_infidelity"] < 1e-9


def test_protocol_verify_physical_informational(capsys):
    assert main(["protocol-verify", "--samples", "5",
                 "--convention", "physical"]) == 0
    out = capsys.readouterr().out
    assert "branch phase" in out


def test_protocol_verify_rejects_zero_samples():
    with pytest.raises(SystemExit):
        main(["protocol-verify", "--samples", "0"])


def test_serve_stdio_one_shot(monkeypatch, capsys):
    fake_in = io.StringIO(
        '{"type":"submit","client":"a","ops":[{"op":"MEASURE","qubits":[0]}]}\n')
    monkeypatch.setattr("sys.stdin", fake_in)
    assert main(["serve", "--transport", "stdio", "--seed", "4"]) == 0
    line = capsys.readouterr().out.strip().splitlines()[-1]
    assert json.loads(line) == {"type": "result",
                                "results": [{"qubit": 0, "bit": 0}]}
