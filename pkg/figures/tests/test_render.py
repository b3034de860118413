"""Tests for the figure renderer: all kinds, determinism, error handling."""

import hashlib
import json
import pathlib

import pytest

import importlib

mod = importlib.import_module("pilotfigs.render")
FigureSpec, RenderError, render = mod.FigureSpec, mod.RenderError, mod.render

FIXTURES = pathlib.Path(__file__).parent / "fixtures"

KIND_TO_FIXTURE = {
    "nmse-vs-N": "nmse_vs_n.csv",
    "nmse-vs-K": "nmse_vs_k.csv",
    "nmse-vs-energy": "nmse_vs_energy.csv",
    "tradeoff": "tradeoff.csv",
    "scaling": "scaling.csv",
}


def spec_for(kind, out, **kwargs):
    kwargs.setdefault("group_by", ("scenario",))
    return FigureSpec(kind=kind, inputs=(str(FIXTURES / KIND_TO_FIXTURE[kind]),),
                      output=str(out), **kwargs)


def sha256(path):
    return hashlib.sha256(pathlib.Path(path).read_bytes()).hexdigest()


@pytest.mark.parametrize("kind", sorted(KIND_TO_FIXTURE))
@pytest.mark.parametrize("ext", ["png", "pdf"])
def test_each_kind_renders_deterministically(kind, ext, tmp_path):
    hashes = []
    for run in (1, 2):
        out = tmp_path / f"{kind}-{run}.{ext}"
        assert render(spec_for(kind, out)) == str(out)
        assert out.stat().st_size > 0
        hashes.append(sha256(out))
    assert hashes[0] == hashes[1], f"{kind}/{ext}: output differs across runs"


def test_render_leaves_input_untouched(tmp_path):
    src = FIXTURES / "tradeoff.csv"
    before = src.read_bytes()
    render(spec_for("tradeoff", tmp_path / "out.png"))
    assert src.read_bytes() == before


def test_spec_validation():
    with pytest.raises(RenderError):
        FigureSpec(kind="pie-chart", inputs=("x.csv",), output="o.png")
    with pytest.raises(RenderError):
        FigureSpec(kind="tradeoff", inputs=(), output="o.png")
    with pytest.raises(RenderError):
        FigureSpec(kind="tradeoff", inputs=("x.csv",), output="o.png",
                   x_scale="cubic")
    with pytest.raises(RenderError):
        mod.spec_from_dict({"kind": "tradeoff", "inputs": ["x.csv"],
                            "output": "o.png", "surprise": 1})


def test_missing_column_error(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n", encoding="utf-8")
    with pytest.raises(RenderError, match="missing CSV columns"):
        render(FigureSpec(kind="scaling", inputs=(str(bad),),
                          output=str(tmp_path / "o.png")))
    assert not (tmp_path / "o.png").exists()


def test_empty_csv_error(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("", encoding="utf-8")
    with pytest.raises(RenderError, match="empty CSV"):
        render(FigureSpec(kind="scaling", inputs=(str(empty),),
                          output=str(tmp_path / "o.png")))
    header_only = tmp_path / "header.csv"
    header_only.write_text("scenario,M,metric,value\n", encoding="utf-8")
    with pytest.raises(RenderError, match="no data rows"):
        render(FigureSpec(kind="scaling", inputs=(str(header_only),),
                          output=str(tmp_path / "o.png")))


def test_wrong_metric_selection_error(tmp_path):
    # a tradeoff CSV has no max_spectral_efficiency-free NMSE rows
    with pytest.raises(RenderError, match="no NMSE rows"):
        render(FigureSpec(kind="nmse-vs-N",
                          inputs=(str(FIXTURES / "tradeoff.csv"),),
                          output=str(tmp_path / "o.png"),
                          group_by=("scenario",)))


def test_cli_kind_flags(tmp_path, capsys):
    out = tmp_path / "fig.png"
    code = mod.main(["--kind", "tradeoff", "--in",
                     str(FIXTURES / "tradeoff.csv"), "--out", str(out),
                     "--group-by", "scenario"])
    assert code == 0
    assert out.exists()
    assert "wrote" in capsys.readouterr().out


def test_cli_spec_file_with_list(tmp_path):
    specs = [
        {"kind": "nmse-vs-N", "input": str(FIXTURES / "nmse_vs_n.csv"),
         "output": str(tmp_path / "a.png"), "group_by": ["scenario"]},
        {"kind": "scaling", "inputs": [str(FIXTURES / "scaling.csv")],
         "output": str(tmp_path / "b.pdf"), "group_by": ["scenario"],
         "title": "peak rate"},
    ]
    spec_path = tmp_path / "specs.json"
    spec_path.write_text(json.dumps(specs), encoding="utf-8")
    assert mod.main(["--spec", str(spec_path)]) == 0
    assert (tmp_path / "a.png").exists() and (tmp_path / "b.pdf").exists()


def test_cli_error_exit_codes(tmp_path, capsys):
    assert mod.main(["--kind", "tradeoff"]) == 2
    assert mod.main(["--kind", "tradeoff", "--in", str(tmp_path / "nope.csv"),
                     "--out", str(tmp_path / "o.png")]) == 2
    capsys.readouterr()
