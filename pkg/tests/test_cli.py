import subprocess
import sys

import pytest

from coopsim.cli import EXIT_CONFIG, EXIT_OK, main, parse_snr_grid


def data_lines(text):
    return [l for l in text.splitlines() if l and not l.startswith("#")]


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_snr_grid_arithmetic():
    assert parse_snr_grid("0:2:20") == [float(x) for x in range(0, 21, 2)]
    assert parse_snr_grid("5:2.5:10") == [5.0, 7.5, 10.0]
    assert parse_snr_grid("1,3,4") == [1.0, 3.0, 4.0]
    assert parse_snr_grid([2, 4]) == [2.0, 4.0]


@pytest.mark.parametrize("bad", ["0:0:10", "10:1:0", "a:1:2", "1:2"])
def test_bad_snr_grid_is_a_config_error(capsys, bad):
    code, _, err = run(capsys, "simulate", "--snr", bad)
    assert code == EXIT_CONFIG and "SNR grid" in err


def test_spectrum_first_rows(capsys):
    code, out, _ = run(capsys, "spectrum", "--code", "5,7,5")
    assert code == EXIT_OK
    rows = data_lines(out)
    assert rows[0] == "d,d1,d2,dR,w1,w2"
    assert rows[1].startswith("7,")
    _, out, _ = run(capsys, "spectrum", "--code", "133,165,171")
    assert data_lines(out)[1].startswith("15,")


def test_compound_spectrum_rows(capsys):
    code, out, _ = run(capsys, "spectrum", "--code", "25,33,37", "--compound")
    assert code == EXIT_OK
    at_f = [r.split(",") for r in data_lines(out)[1:] if r.startswith("24,")]
    assert sorted(tuple(r[1:4]) for r in at_f) == [("0", "12", "12"), ("12", "0", "12"), ("12", "12", "0")]


def test_spectrum_truncation_diagnostic(capsys):
    code, _, err = run(capsys, "spectrum", "--code", "5,7,5", "--d-max", "3")
    assert code == 2 and "increase d_max" in err


def test_missing_config_file(capsys, tmp_path):
    code, _, err = run(capsys, "simulate", "--config", str(tmp_path / "nope.toml"))
    assert code == EXIT_CONFIG and "not found" in err


def test_schema_errors_name_the_field(capsys, tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text('[campaign]\nmin_bit_errors = 0\nschemes = "PARC"\n')
    code, _, err = run(capsys, "simulate", "--config", str(cfg))
    assert code == EXIT_CONFIG
    assert "min_bit_errors" in err and "schemes" in err


def test_simulate_is_deterministic_and_echoes_config(capsys, tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text('[campaign]\nschemes = ["PARC", "UNCODED"]\ncodes = ["5,7,5"]\nn_relays = [2]\n'
                   'snr_db = "0:5:10"\nk = 32\nmin_bit_errors = 10\nmax_packets = 16\nseed = 3\n')
    outs = []
    for name in ("a.csv", "b.csv"):
        code = main(["simulate", "--config", str(cfg), "--seed", "4", "-o", str(tmp_path / name)])
        assert code == EXIT_OK
        outs.append((tmp_path / name).read_text())
    assert outs[0] == outs[1]
    assert "# seed = 4" in outs[0]  # the flag overrides the file
    assert len(data_lines(outs[0])) == 1 + 2 * 3


def test_simulate_flag_grid(capsys):
    code, out, _ = run(capsys, "simulate", "--scheme", "uncoded", "--code", "5,7,5", "--relays", "1",
                       "--snr", "0:2:20", "--k", "8", "--max-packets", "2", "--seed", "7")
    assert code == EXIT_OK
    assert len(data_lines(out)) == 12


def test_analyze_shares_the_simulation_header(capsys, tmp_path):
    _, sim, _ = run(capsys, "simulate", "--scheme", "uncoded", "--code", "5,7,5", "--snr", "0", "--k", "8",
                    "--max-packets", "1")
    div = tmp_path / "div.csv"
    code, ana, _ = run(capsys, "analyze", "--scheme", "parc,ncc", "--code", "5,7,5", "--relays", "2",
                       "--snr", "0:5:40", "--diversity-output", str(div))
    assert code == EXIT_OK
    assert data_lines(sim)[0] == data_lines(ana)[0]
    slopes = {}
    for row in data_lines(div.read_text())[1:]:
        scheme, *_, snr, z = row.replace('"5,7,5"', "c").split(",")
        slopes[(scheme, float(snr))] = float(z)
    assert slopes[("NCC", 30.0)] == pytest.approx(2.0, abs=0.2)


def test_analyze_rejects_schemes_without_a_bound(capsys):
    code, _, err = run(capsys, "analyze", "--scheme", "ref1")
    assert code == EXIT_CONFIG and "REF1" in err


def test_diversity_subcommand(capsys, tmp_path):
    src = tmp_path / "ber.csv"
    src.write_text("# note\nscheme,code,n_relays,snr_db,packets,bits,bit_errors,ber,ci95,seconds\n"
                   + "".join(f'PARC,"5,7,5",2,{s},0,0,0,{10 ** (-s / 5):e},0,0\n' for s in (0, 5, 10, 15)))
    code, out, _ = run(capsys, "diversity", str(src))
    assert code == EXIT_OK
    rows = data_lines(out)
    assert rows[0] == "scheme,code,n_relays,snr_db,diversity"
    assert [float(r.split(",")[-1]) for r in rows[1:]] == pytest.approx([2.0, 2.0])


def test_diversity_rejects_malformed_csv(capsys, tmp_path):
    src = tmp_path / "bad.csv"
    src.write_text("a,b\n1,2\n")
    code, _, _ = run(capsys, "diversity", str(src))
    assert code == EXIT_CONFIG


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "coopsim", "spectrum", "--code", "5,7"], capture_output=True,
                          text=True, check=False)
    assert proc.returncode == 0
    assert "d,d1,d2,dR,w1,w2" in proc.stdout
