"""Command line behavior for both figure modes and the exit codes."""

import textwrap

from svrgplots.cli import main

TRACE = ["0,0.0,0.0,1.0,2.0,4.0",
         "30,1.0,0.0,0.1,0.2,0.4"]


class TestFlagMode:
    def test_renders_single_figure(self, tmp_path, write_trace, capsys):
        a = write_trace("a.csv", TRACE)
        out = tmp_path / "figs" / "conv"
        rc = main(["--inputs", str(a), "--x", "epoch_equiv",
                   "--y", "suboptimality", "--out", str(out),
                   "--labels", "tuned", "--title", "demo"])
        assert rc == 0
        assert "conv.svg" in capsys.readouterr().out
        assert (tmp_path / "figs" / "conv.svg").exists()
        assert (tmp_path / "figs" / "conv.png").exists()

    def test_missing_flags_fail(self, write_trace, capsys):
        a = write_trace("a.csv", TRACE)
        assert main(["--inputs", str(a), "--x", "epoch_equiv"]) == 1
        err = capsys.readouterr().err
        assert "--y" in err and "--out" in err

    def test_missing_input_names_file(self, tmp_path, capsys):
        rc = main(["--inputs", str(tmp_path / "gone.csv"),
                   "--x", "epoch_equiv", "--y", "suboptimality",
                   "--out", str(tmp_path / "f")])
        assert rc == 1
        assert "gone.csv" in capsys.readouterr().err

    def test_unmatched_glob_fails(self, tmp_path, capsys):
        rc = main(["--inputs", str(tmp_path / "none*.csv"),
                   "--x", "epoch_equiv", "--y", "suboptimality",
                   "--out", str(tmp_path / "f")])
        assert rc == 1
        assert "no files match" in capsys.readouterr().err


class TestSpecMode:
    def test_renders_every_section(self, tmp_path, write_trace, write_tune):
        write_trace("a.csv", TRACE)
        write_tune("table.csv", ["1,0.03,100,9000.0", "2,0.06,60,8000.0"])
        specfile = tmp_path / "figures.ini"
        specfile.write_text(textwrap.dedent("""
            [figure:conv]
            inputs = a.csv
            x = epoch_equiv
            y = suboptimality
            output = figs/conv

            [figure:sweep]
            inputs = table.csv
            x = b
            y = complexity
            output = figs/sweep
            """))
        assert main(["--spec", str(specfile)]) == 0
        for name in ("conv", "sweep"):
            assert (tmp_path / "figs" / f"{name}.svg").exists()
            assert (tmp_path / "figs" / f"{name}.png").exists()

    def test_spec_paths_resolve_against_spec_dir(self, tmp_path, write_trace,
                                                 monkeypatch):
        write_trace("a.csv", TRACE)
        specfile = tmp_path / "figures.ini"
        specfile.write_text(textwrap.dedent("""
            [figure:conv]
            inputs = a.csv
            x = epoch_equiv
            y = suboptimality
            output = out/conv
            """))
        monkeypatch.chdir(tmp_path.parent)  # cwd must not matter
        assert main(["--spec", str(specfile)]) == 0
        assert (tmp_path / "out" / "conv.svg").exists()

    def test_unknown_section_rejected(self, tmp_path, capsys):
        specfile = tmp_path / "f.ini"
        specfile.write_text("[plot:conv]\nx = b\n")
        assert main(["--spec", str(specfile)]) == 1
        assert "figure:NAME" in capsys.readouterr().err

    def test_unknown_key_rejected(self, tmp_path, capsys):
        specfile = tmp_path / "f.ini"
        specfile.write_text(textwrap.dedent("""
            [figure:conv]
            inputs = a.csv
            x = epoch_equiv
            y = suboptimality
            output = f
            stile = dark
            """))
        assert main(["--spec", str(specfile)]) == 1
        assert "stile" in capsys.readouterr().err

    def test_missing_required_key(self, tmp_path, capsys):
        specfile = tmp_path / "f.ini"
        specfile.write_text("[figure:conv]\nx = epoch_equiv\n")
        assert main(["--spec", str(specfile)]) == 1
        assert "missing" in capsys.readouterr().err

    def test_spec_excludes_flag_mode(self, tmp_path, capsys):
        specfile = tmp_path / "f.ini"
        specfile.write_text("[figure:c]\n")
        rc = main(["--spec", str(specfile), "--x", "b"])
        assert rc == 1

    def test_missing_spec_file(self, tmp_path, capsys):
        assert main(["--spec", str(tmp_path / "nope.ini")]) == 1
        assert "nope.ini" in capsys.readouterr().err


class TestExitCodes:
    def test_help_is_zero(self, capsys):
        assert main(["--help"]) == 0

    def test_unknown_flag(self, capsys):
        assert main(["--frobnicate"]) == 1

    def test_no_arguments(self, capsys):
        assert main([]) == 1
