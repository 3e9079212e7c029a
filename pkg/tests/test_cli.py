import json

import pytest

from rbnsim.cli import main
from rbnsim.graphgen import graph_digest, read_edge_list


@pytest.fixture
def files(tmp_path):
    (tmp_path / "delta3.pmf").write_text("3 1.0\n")
    (tmp_path / "delta4.pmf").write_text("4 1.0\n")
    (tmp_path / "mix.pmf").write_text("# two or four\n2 0.5\n4 0.5\n")
    (tmp_path / "joint.txt").write_text("2 4 0.5\n4 2 0.5\n")
    (tmp_path / "bad.pmf").write_text("2 0.5\n4 0.4\n")
    (tmp_path / "exp.ini").write_text(
        "[small]\nmodel = rbn2\npmf = 2:0.5, 4:0.5\nq = 0.3, 0.45\nn = 100\nt_max = 40\nreplicas = 2\n")
    return tmp_path


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    return code, capsys.readouterr().out


class TestExamples:
    def test_pi_cubic(self, capsys, files):
        code, out = run(capsys, "pi", "--pmf", files / "delta3.pmf", "--q", 0.5)
        assert code == 0 and out == "0.3819660113\n"

    def test_pi_joint_and_json(self, capsys, files):
        code, out = run(capsys, "pi", "--joint", files / "joint.txt", "--q", 0.45, "--format", "json")
        assert code == 0 and 0 < json.loads(out)["pi"] < 1

    def test_classify(self, capsys, files):
        code, out = run(capsys, "classify", "--model", "rbn2", "--pmf", files / "delta4.pmf", "--p", 0.5)
        assert code == 0
        assert out == "product,regime\n2,chaotic\n"

    def test_verify_duality(self, capsys):
        code, out = run(capsys, "verify-duality", "--n", 6, "--instances", 50, "--seed", 7)
        lines = out.strip().splitlines()
        assert code == 0
        assert lines[0] == "instance,n,q,t,lhs,rhs,diff"
        assert len(lines) == 51
        assert all(float(line.split(",")[-1]) < 1e-10 for line in lines[1:])

    def test_gamma(self, capsys, files):
        code, out = run(capsys, "gamma", "--pmf", files / "mix.pmf", "--eta", 0.5)
        assert code == 0 and float(out) == pytest.approx(2.0)


class TestArtifacts:
    def test_gen_then_simulate_round_trip(self, capsys, files):
        out_file = files / "g.txt"
        assert main(["gen", "--model", "rbn2", "--n", "200", "--pmf", str(files / "mix.pmf"),
                     "--seed", "3", "--out", str(out_file)]) == 0
        g = read_edge_list(out_file)
        assert g.n == 200
        meta = files / "meta.json"
        code, from_file = run(capsys, "simulate", "--graph", out_file, "--q", 0.45, "--t-max", 30,
                              "--seed", 3, "--meta", meta)
        assert code == 0
        assert json.loads(meta.read_text())["graph_sha256"] == graph_digest(g)
        code, generated = run(capsys, "simulate", "--model", "rbn2", "--n", 200, "--pmf", files / "mix.pmf",
                              "--q", 0.45, "--t-max", 30, "--seed", 3)
        assert generated == from_file
        assert from_file.startswith("t,occupied_count,density\n0,200,1\n")

    @pytest.mark.parametrize("argv", [
        ["gen", "--model", "rbn4", "--n", "150", "--joint", "{joint}"],
        ["gen", "--model", "rbn3", "--n", "150", "--pmf", "{mix}", "--multigraph"],
        ["simulate", "--model", "rbn2", "--n", "150", "--pmf", "{mix}", "--q", "0.4", "--t-max", "20"],
        ["dual", "--model", "rbn2", "--n", "150", "--pmf", "{mix}", "--q", "0.4", "--t-max", "20", "--x0", "5"],
        ["attractor", "--model", "rbn1", "--n", "12", "--r", "2", "--p", "0.5", "--t-max", "5000"],
        ["verify-duality", "--n", "5", "--instances", "5"],
        ["sweep", "--config", "{ini}"],
        ["simulate", "--model", "rbn2", "--n", "50", "--pmf", "{mix}", "--q", "0.4", "--format", "json"],
    ])
    def test_reruns_byte_identical(self, capsys, files, argv):
        argv = [a.format(joint=files / "joint.txt", mix=files / "mix.pmf", ini=files / "exp.ini") for a in argv]
        c1, a = run(capsys, *argv, "--seed", 4)
        c2, b = run(capsys, *argv, "--seed", 4)
        assert c1 == c2 == 0
        assert a == b and a

    def test_seed_changes_output(self, capsys, files):
        base = ["gen", "--model", "rbn2", "--n", "100", "--pmf", files / "mix.pmf"]
        assert run(capsys, *base, "--seed", 1)[1] != run(capsys, *base, "--seed", 2)[1]

    def test_attractor_trajectory(self, capsys, files):
        traj = files / "traj.csv"
        code, out = run(capsys, "attractor", "--model", "rbn1", "--n", 300, "--r", 2, "--p", 0.5,
                        "--t-max", 50, "--trajectory", traj)
        assert code == 0 and out.startswith("transient_length,cycle_length,censored\n")
        assert traj.read_text().startswith("t,density_ones,zeta_density\n0,")

    def test_sweep_summary(self, capsys, files):
        summary = files / "s.json"
        code, out = run(capsys, "sweep", "--config", files / "exp.ini", "--summary", summary)
        assert code == 0 and len(out.strip().splitlines()) == 5
        cells = json.loads(summary.read_text())[0]["cells"]
        assert [c["q"] for c in cells] == [0.3, 0.45]


class TestExitCodes:
    def test_usage(self, capsys):
        assert main([]) == 2
        assert main(["nonsense"]) == 2
        assert main(["pi", "--q", "0.5", "--p", "0.5"]) == 2
        capsys.readouterr()

    def test_help_is_ok(self, capsys):
        assert main(["--help"]) == 0
        capsys.readouterr()

    def test_precondition(self, capsys, files):
        assert main(["pi", "--pmf", str(files / "bad.pmf"), "--q", "0.5"]) == 3
        assert main(["pi", "--pmf", str(files / "delta3.pmf"), "--q", "1.5"]) == 3
        assert main(["pi", "--pmf", str(files / "delta3.pmf")]) == 3
        assert main(["gen", "--model", "rbn2", "--n", "3", "--pmf", str(files / "delta3.pmf")]) == 3
        assert main(["attractor", "--model", "rbn1", "--n", "10", "--r", "2"]) == 3

    def test_generation_exhausted(self, capsys, files):
        (files / "d22.txt").write_text("2 2 1.0\n")
        assert main(["gen", "--model", "rbn4", "--n", "2", "--joint", str(files / "d22.txt"),
                     "--max-retries", "10"]) == 4

    def test_cap(self, capsys):
        assert main(["verify-duality", "--n", "15", "--instances", "1"]) == 5

    def test_mismatch(self, capsys):
        # a negative tolerance cannot be met
        assert main(["verify-duality", "--n", "4", "--instances", "3", "--tol", "-1"]) == 1
        capsys.readouterr()
