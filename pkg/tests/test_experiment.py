import csv
import io

import numpy as np
import pytest

from lfcodec.core import LensletFrame
from lfcodec.experiment import (
    ANCHOR,
    BD_COLUMNS,
    CSV_COLUMNS,
    ExperimentConfig,
    RDExperimentError,
    SynthConfig,
    plot_rd,
    run_cell,
    run_rd_experiment,
    synthesize,
    write_truth_csv,
)
from lfcodec.io import FormatError

SMALL = dict(n_s=8, n_t=8, frames=3)


def _sections(text):
    main, _, bd = text.partition("\n\n")
    return list(csv.reader(io.StringIO(main))), list(csv.reader(io.StringIO(bd)))


def test_synth_config_parsing():
    cfg = SynthConfig.from_kv(
        {"frames": "4", "depth": "3000", "ray_motion": "1, 0", "steps": "1 0; 2 0.5; 0 0", "patch": "0.1,0.9,0,1"}
    )
    assert cfg.frames == 4 and cfg.depth == 3000.0 and cfg.ray_motion == (1.0, 0.0)
    assert cfg.steps == ((1.0, 0.0), (2.0, 0.5), (0.0, 0.0)) and cfg.patch == (0.1, 0.9, 0.0, 1.0)
    assert cfg.motion_path().steps[0] == (0.0, 0.0)
    with pytest.raises(FormatError, match="unknown"):
        SynthConfig.from_kv({"colour": "red"})
    with pytest.raises(FormatError, match="frames"):
        SynthConfig.from_kv({"frames": "many"})
    with pytest.raises(ValueError):
        SynthConfig(frames=3, steps=((1.0, 0.0),)).motion_path()


def test_synthesize_truth_matches_request(tmp_path):
    cfg = SynthConfig(ray_motion=(0.25, -0.5), **SMALL)
    frames, truth = synthesize(cfg)
    assert len(frames) == 3 and frames[0].pixels.shape == (64, 64)
    path = tmp_path / "truth.csv"
    write_truth_csv(path, truth, cfg.optics)
    rows = list(csv.DictReader(open(path)))
    assert [r["frame"] for r in rows] == ["0", "1", "2"]
    assert float(rows[1]["ds"]) == pytest.approx(0.25) and float(rows[1]["dt"]) == pytest.approx(-0.5)


def test_static_input_gives_zero_bd_rates():
    frames, _ = synthesize(SynthConfig(ray_motion=(0, 0), **SMALL))
    report = run_rd_experiment(ExperimentConfig(frames))
    assert set(report.bd_rates) == {"ray/quarter", "ray/half", "ray/integer"}
    for value in report.bd_rates.values():
        assert abs(value) < 1.0
    intra = [c.bits for c in report.cells if c.variant == ANCHOR]
    for variant in ("ray/quarter", "ray/integer"):
        assert np.allclose([c.bits for c in report.cells if c.variant == variant], intra, rtol=0.02)


def test_csv_is_deterministic_without_timing():
    frames, _ = synthesize(SynthConfig(**SMALL))
    cfg = ExperimentConfig(frames, variants=("ray/quarter", "conventional"))
    a = run_rd_experiment(cfg).to_csv(timing=False)
    b = run_rd_experiment(cfg).to_csv(timing=False)
    assert a == b
    main, bd = _sections(a)
    assert tuple(main[0]) == CSV_COLUMNS and len(main) == 1 + 2 * 4
    assert tuple(bd[0]) == BD_COLUMNS and bd[1][:2] == ["ray/quarter", ANCHOR]


def test_report_rows_follow_variant_and_qp_order():
    frames, _ = synthesize(SynthConfig(**SMALL))
    seen = []
    report = run_rd_experiment(
        ExperimentConfig(frames, qps=(30, 42), variants=("ray/integer",), max_frames=2), progress=seen.append
    )
    assert [(c.variant, c.qp) for c in report.cells] == [("ray/integer", 30), ("ray/integer", 42)]
    assert seen == report.cells and report.bd_rates == {}
    assert "\n\n" not in report.to_csv()


def test_codec_errors_carry_variant_and_qp():
    frames, _ = synthesize(SynthConfig(**SMALL))
    bad = frames[:1] + [LensletFrame(frames[1].pixels, frames[1].grid.__class__(4, 4, 16, 16))]
    with pytest.raises(RDExperimentError, match="ray/half at qp 36") as info:
        run_cell(ExperimentConfig(bad), bad, "ray/half", 36)
    assert info.value.variant == "ray/half" and info.value.qp == 36


def test_unknown_variant_rejected():
    frames, _ = synthesize(SynthConfig(**SMALL))
    with pytest.raises(ValueError, match="unknown variants"):
        ExperimentConfig(frames, variants=("ray/eighth",))


def test_plot_is_written(tmp_path):
    frames, _ = synthesize(SynthConfig(**SMALL))
    report = run_rd_experiment(ExperimentConfig(frames, variants=("ray/quarter", "conventional"), max_frames=2))
    out = tmp_path / "rd.png"
    plot_rd(report, out)
    assert out.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
