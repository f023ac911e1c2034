"""Rendering functions: schema checks, determinism, display clamp."""
import hashlib

import pytest

from mimodist_plots import PlotError, render_evm, render_psd

PSD_HEADER = ("sweep_value,k_centered,freq_norm,desired_db,dist_mc_db,"
              "dist_analytic_db,dist_iso_db\n")
EVM_HEADER = "sweep_value,evm_mc_db,evm_analytic_db,evm_iso_db,stderr_db\n"


def write_psd_csv(path, sweep_values=(1, 5, 20), n=16):
    lines = [PSD_HEADER]
    for v in sweep_values:
        for i in range(n):
            k = i - n // 2
            fn = 2.0 * k / n
            lines.append(f"{v},{k},{fn:.6f},{40 - v:.2f},"
                         f"{10 - v - abs(k):.2f},{9.8 - v - abs(k):.2f},"
                         f"{-120 + i:.2f}\n")
    path.write_text("".join(lines))
    return path


def write_evm_csv(path, stderr=True):
    header = EVM_HEADER if stderr else EVM_HEADER.replace(",stderr_db", "")
    lines = [header]
    for v, e in ((1, -24.0), (5, -34.0), (20, -39.0)):
        row = f"{v},{e:.2f},{e - 0.2:.2f},{e - 15:.2f}"
        if stderr:
            row += ",0.15"
        lines.append(row + "\n")
    path.write_text("".join(lines))
    return path


def sha256(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


class TestRenderPsd:
    def test_creates_image(self, tmp_path):
        csv = write_psd_csv(tmp_path / "psd.csv")
        out = tmp_path / "psd.png"
        render_psd(csv, out)
        assert out.exists() and out.stat().st_size > 1000

    def test_deterministic_across_runs(self, tmp_path):
        csv = write_psd_csv(tmp_path / "psd.csv")
        a, b = tmp_path / "a.png", tmp_path / "b.png"
        render_psd(csv, a)
        render_psd(csv, b)
        assert sha256(a) == sha256(b)

    def test_svg_deterministic(self, tmp_path):
        csv = write_psd_csv(tmp_path / "psd.csv")
        a, b = tmp_path / "a.svg", tmp_path / "b.svg"
        render_psd(csv, a)
        render_psd(csv, b)
        assert sha256(a) == sha256(b)

    def test_empty_csv_rejected_no_file(self, tmp_path):
        csv = tmp_path / "psd.csv"
        csv.write_text("")
        out = tmp_path / "out.png"
        with pytest.raises(PlotError):
            render_psd(csv, out)
        assert not out.exists()

    def test_header_only_rejected(self, tmp_path):
        csv = tmp_path / "psd.csv"
        csv.write_text(PSD_HEADER)
        with pytest.raises(PlotError, match="no data rows"):
            render_psd(csv, tmp_path / "out.png")

    def test_missing_column_diagnostic(self, tmp_path):
        csv = tmp_path / "psd.csv"
        csv.write_text("sweep_value,k_centered\n1,0\n")
        with pytest.raises(PlotError, match="dist_mc_db"):
            render_psd(csv, tmp_path / "out.png")

    def test_single_row_degenerate_plot(self, tmp_path):
        csv = write_psd_csv(tmp_path / "psd.csv", sweep_values=(1,), n=1)
        out = tmp_path / "out.png"
        render_psd(csv, out)
        assert out.exists()

    def test_non_numeric_value_diagnostic(self, tmp_path):
        csv = tmp_path / "psd.csv"
        csv.write_text(PSD_HEADER + "1,0,0.0,abc,1,1,1\n")
        with pytest.raises(PlotError, match="non-numeric"):
            render_psd(csv, tmp_path / "out.png")


class TestRenderEvm:
    def test_creates_image(self, tmp_path):
        csv = write_evm_csv(tmp_path / "evm.csv")
        out = tmp_path / "evm.png"
        render_evm(csv, out)
        assert out.exists() and out.stat().st_size > 1000

    def test_deterministic(self, tmp_path):
        csv = write_evm_csv(tmp_path / "evm.csv")
        a, b = tmp_path / "a.png", tmp_path / "b.png"
        render_evm(csv, a)
        render_evm(csv, b)
        assert sha256(a) == sha256(b)

    def test_missing_stderr_warns_but_renders(self, tmp_path):
        csv = write_evm_csv(tmp_path / "evm.csv", stderr=False)
        out = tmp_path / "out.png"
        with pytest.warns(UserWarning, match="stderr_db"):
            render_evm(csv, out)
        assert out.exists()

    def test_ragged_rows_diagnostic(self, tmp_path):
        csv = tmp_path / "evm.csv"
        csv.write_text(EVM_HEADER + "1,-24.0,-24.2\n")
        with pytest.raises(PlotError, match="expected 5 fields"):
            render_evm(csv, tmp_path / "out.png")

    def test_missing_column_diagnostic(self, tmp_path):
        csv = tmp_path / "evm.csv"
        csv.write_text("sweep_value,evm_mc_db\n1,-24.0\n")
        with pytest.raises(PlotError, match="evm_analytic_db"):
            render_evm(csv, tmp_path / "out.png")

    def test_deep_values_clamped_to_floor(self, tmp_path):
        # Values below -80 dB must not stretch the axis (display clamp).
        csv = tmp_path / "evm.csv"
        csv.write_text(EVM_HEADER + "1,-24.0,-24.2,-300.0,0.1\n"
                       + "5,-34.0,-34.2,-310.0,0.1\n")
        out = tmp_path / "out.png"
        render_evm(csv, out)
        assert out.exists()
