import pathlib

import pytest

from dpfigures.render import FigureSpec, SchemaError, main, render

DATA = pathlib.Path(__file__).parent / "data"

GOLDEN = {
    "fig1": [str(DATA / "fig1_golden.csv"), str(DATA / "fig1_silhouette_golden.csv")],
    "fig3a": [str(DATA / "fig3a_golden.csv")],
    "fig3b": [str(DATA / "fig3b_golden.csv")],
}


@pytest.mark.parametrize("figure", ["fig1", "fig3a", "fig3b"])
def test_render_golden_is_pixel_identical_across_runs(figure, tmp_path):
    out1 = tmp_path / f"{figure}_a.png"
    out2 = tmp_path / f"{figure}_b.png"
    render(FigureSpec(inputs=GOLDEN[figure], figure=figure, output=str(out1)))
    render(FigureSpec(inputs=GOLDEN[figure], figure=figure, output=str(out2)))
    b1, b2 = out1.read_bytes(), out2.read_bytes()
    assert b1[:8] == b"\x89PNG\r\n\x1a\n"
    assert len(b1) > 5000
    assert b1 == b2


def test_fig1_renders_without_silhouette(tmp_path):
    out = tmp_path / "fig1.png"
    render(FigureSpec(inputs=[GOLDEN["fig1"][0]], figure="fig1", output=str(out)))
    assert out.exists()


def test_fig2_uses_the_sweep_layout(tmp_path):
    out = tmp_path / "fig2.png"
    render(FigureSpec(inputs=[GOLDEN["fig1"][0]], figure="fig2", output=str(out)))
    assert out.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_schema_mismatch_names_the_offending_column(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("mechanism,eps,delta,threshold,trials\nx,1,0,2,5\n")
    with pytest.raises(SchemaError, match="expected column 'param', found 'threshold'"):
        render(FigureSpec(inputs=[str(bad)], figure="fig1", output=str(tmp_path / "x.png")))


def test_extra_columns_are_rejected(tmp_path):
    bad = tmp_path / "bad.csv"
    header = "mechanism,eps,delta,param,trials,failures,bias,bias_ci,se,rmse,rmse_ci,extra"
    bad.write_text(header + "\n" + "x," + ",".join(["1"] * 11) + "\n")
    with pytest.raises(SchemaError, match="extra columns"):
        render(FigureSpec(inputs=[str(bad)], figure="fig3a", output=str(tmp_path / "x.png")))


def test_empty_csv_errors_and_writes_nothing(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("mechanism,eps,delta,param,trials,failures,bias,bias_ci,se,rmse,rmse_ci\n")
    out = tmp_path / "nothing.png"
    with pytest.raises(SchemaError, match="no data rows"):
        render(FigureSpec(inputs=[str(empty)], figure="fig1", output=str(out)))
    assert not out.exists()


def test_unknown_figure_id_rejected(tmp_path):
    with pytest.raises(ValueError, match="unknown figure id"):
        FigureSpec(inputs=["x.csv"], figure="fig9", output="y.png")


def test_cli_happy_path_and_error_path(tmp_path, capsys):
    out = tmp_path / "fig3a.png"
    code = main(["--figure", "fig3a", "--input", GOLDEN["fig3a"][0], "--output", str(out)])
    assert code == 0
    assert out.exists()
    code = main(["--figure", "fig3a", "--input", str(tmp_path / "missing.csv"), "--output", str(out)])
    assert code == 1
    err = capsys.readouterr().err
    assert "missing.csv" in err
