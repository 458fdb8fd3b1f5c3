"""
SK Thermography - Pipeline Tests

Tests for the end-to-end run on synthetic thermograms:
- Phantom generation
- Stage outputs, written files and determinism
- Failure reporting per stage

Run with: pytest backend/app/tests/test_pipeline.py -v
"""

import json

import numpy as np
import pytest


# ===========================================
# Test Fixtures
# ===========================================

@pytest.fixture
def pillar_csv(tmp_path):
    """64x64 pillar phantom written as CSV."""
    from app.services.image_io_service import write_image
    from app.services.pipeline_service import phantom

    generated = phantom("pillar", (64, 64), seed=1)
    return write_image(generated.image, tmp_path / "pillar.csv"), generated


def make_config(input_path, output_dir, **overrides):
    from app.models.schemas import PipelineConfig

    params = {
        "input_path": str(input_path),
        "output_dir": str(output_dir),
        "preset": "bspline-fast",
        "threads": 1,
    }
    params.update(overrides)
    return PipelineConfig(**params)


# ===========================================
# Phantom Tests
# ===========================================

class TestPhantom:
    """Tests for the synthetic thermograms."""

    def test_pillar_mask(self):
        """The pillar covers the middle quarter of the columns."""
        from app.services.pipeline_service import phantom_mask

        mask = phantom_mask("pillar", (40, 64))
        assert mask[:, 24:40].all()
        assert not mask[:, :24].any() and not mask[:, 40:].any()

    def test_joint_mask_is_l_shaped(self):
        from app.services.pipeline_service import phantom_mask

        mask = phantom_mask("beam_pillar_joint", (64, 64))
        assert not mask[:8].any()
        assert mask[8:24, 24:].all()
        assert mask[24:, 24:40].all()
        assert not mask[24:, 40:].any()

    def test_noise_free_values(self):
        from app.services.pipeline_service import phantom

        generated = phantom("pillar", (32, 48), temps=(19.0, 22.0), noise=0.0)
        assert set(np.unique(generated.image.values)) == {19.0, 22.0}
        assert np.array_equal(generated.image.values == 19.0, generated.truth)

    def test_seeded(self):
        from app.services.pipeline_service import phantom

        a = phantom("beam_pillar_joint", (32, 32), seed=4)
        b = phantom("beam_pillar_joint", (32, 32), seed=4)
        assert np.array_equal(a.image.values, b.image.values)
        assert not a.truth.flags.writeable

    @pytest.mark.parametrize("kwargs", [
        {"kind": "lintel"},
        {"size": (16, 64)},
        {"temps": (20.0, 20.0)},
        {"noise": -0.1},
    ])
    def test_invalid(self, kwargs):
        from app.errors import InvalidParameterError
        from app.services.pipeline_service import phantom

        with pytest.raises(InvalidParameterError):
            phantom(**kwargs)

    def test_resample_mask(self):
        """Nearest-center resampling doubles and halves a mask."""
        from app.services.pipeline_service import resample_mask

        mask = np.array([[True, False], [False, True]])
        doubled = resample_mask(mask, (4, 4))
        assert np.array_equal(doubled, np.kron(mask, np.ones((2, 2), dtype=bool)))
        assert np.array_equal(resample_mask(doubled, (2, 2)), mask)

    def test_map_line_to_output(self):
        from app.services.pipeline_service import map_line_to_output

        assert map_line_to_output((1, 1), (10, 5), 2.0, (20, 10)) == ((2, 2), (20, 10))


# ===========================================
# Pipeline Tests
# ===========================================

class TestRunPipeline:
    """Tests for complete runs."""

    def test_outputs(self, pillar_csv, tmp_path):
        """A run writes every file and fills every report section."""
        from app.services.pipeline_service import run_pipeline

        path, _ = pillar_csv
        out = tmp_path / "run"
        run = run_pipeline(make_config(path, out))
        report = run.report
        assert report.status == "ok"
        assert report.enhance.output_shape == [128, 128]
        assert report.threshold.T_P1 < report.threshold.T_m < report.threshold.T_P2
        assert 20.0 < report.threshold.T_m < 23.0
        assert report.segmentation.bridge_area + report.segmentation.external_area == 128 * 128
        for name in ("enhanced.csv", "mask.pgm", "contours.csv", "pipeline_config.json", "run_report.json"):
            assert (out / name).exists()
        assert set(report.stage_seconds) == {
            "ingest", "enhance", "histogram", "threshold", "segment", "contours", "itb", "write",
        }
        saved = json.loads((out / "run_report.json").read_text())
        assert saved["status"] == "ok"
        assert saved["threshold"]["T_m"] == report.threshold.T_m

    def test_mask_matches_ground_truth(self, pillar_csv, tmp_path):
        """The enhanced-image mask agrees with the phantom on at least 97% of pixels."""
        from app.services.pipeline_service import resample_mask, run_pipeline
        from app.services.segmentation_service import mask_agreement

        path, generated = pillar_csv
        run = run_pipeline(make_config(path, tmp_path / "run"))
        truth = resample_mask(generated.truth, run.mask.shape)
        assert mask_agreement(run.mask, truth) >= 0.97

    def test_itb_on_raw_and_enhanced(self, pillar_csv, tmp_path):
        """A line across the pillar gives raw and enhanced indices above one."""
        from app.services.pipeline_service import run_pipeline

        path, _ = pillar_csv
        run = run_pipeline(make_config(path, tmp_path / "run", line="32,1:32,64", t_inside=25.0))
        raw, enhanced = run.report.itb
        assert (raw.source, enhanced.source) == ("raw", "enhanced")
        assert raw.N == 64
        assert enhanced.N == 127
        assert raw.I_tb > 1.0 and enhanced.I_tb > 1.0
        assert abs(raw.T_1D - 23.0) < 0.5

    def test_explicit_t_1d(self, pillar_csv, tmp_path):
        from app.services.pipeline_service import run_pipeline

        path, _ = pillar_csv
        run = run_pipeline(make_config(path, tmp_path / "run", line="10,1:10,64", t_inside=25.0, t_1d=23.0))
        assert all(r.T_1D == 23.0 for r in run.report.itb)

    def test_deterministic(self, pillar_csv, tmp_path):
        """Identical inputs and config give identical outputs."""
        from app.services.pipeline_service import run_pipeline

        path, _ = pillar_csv
        first = run_pipeline(make_config(path, tmp_path / "a"))
        second = run_pipeline(make_config(path, tmp_path / "b"))
        assert np.array_equal(first.enhanced.values, second.enhanced.values)
        assert np.array_equal(first.mask.mask, second.mask.mask)
        assert (tmp_path / "a" / "contours.csv").read_text() == (tmp_path / "b" / "contours.csv").read_text()

    def test_rerun_from_saved_config(self, pillar_csv, tmp_path):
        from app.services.image_io_service import read_json
        from app.services.pipeline_service import load_pipeline_config, run_pipeline

        path, _ = pillar_csv
        first = run_pipeline(make_config(path, tmp_path / "a"))
        cfg = load_pipeline_config(read_json(tmp_path / "a" / "pipeline_config.json"))
        assert cfg.preset == "bspline-fast"
        second = run_pipeline(cfg.model_copy(update={"output_dir": str(tmp_path / "b")}))
        assert second.report.threshold.T_m == first.report.threshold.T_m

    def test_pgm_output(self, pillar_csv, tmp_path):
        from app.services.pipeline_service import run_pipeline

        path, _ = pillar_csv
        run = run_pipeline(make_config(path, tmp_path / "run", output_format="pgm"))
        assert run.report.files["enhanced"].endswith("enhanced.pgm")
        assert (tmp_path / "run" / "enhanced.pgm.scale.json").exists()

    def test_missing_input_fails_ingest(self, tmp_path):
        """A missing file is reported as an ingest failure."""
        from app.errors import StageError
        from app.services.pipeline_service import run_pipeline

        out = tmp_path / "run"
        with pytest.raises(StageError) as exc_info:
            run_pipeline(make_config(tmp_path / "absent.csv", out))
        assert exc_info.value.stage == "ingest"
        assert exc_info.value.exit_code == 2
        saved = json.loads((out / "run_report.json").read_text())
        assert saved["status"] == "failed"
        assert saved["failed_stage"] == "ingest"

    def test_even_smoothing_fails_histogram(self, pillar_csv, tmp_path):
        """An even smoothing window stops the run at the histogram stage."""
        from app.errors import StageError
        from app.services.pipeline_service import run_pipeline

        path, _ = pillar_csv
        with pytest.raises(StageError) as exc_info:
            run_pipeline(make_config(path, tmp_path / "run", smooth=4))
        assert exc_info.value.stage == "histogram"
        assert exc_info.value.cause.error_code == "invalid_parameter"
        assert exc_info.value.exit_code == 2

    def test_line_needs_t_inside(self, tmp_path):
        from pydantic import ValidationError

        with pytest.raises(ValidationError):
            make_config(tmp_path / "x.csv", tmp_path / "run", line="1,1:1,5")

    def test_invalid_saved_config(self):
        from app.errors import InvalidParameterError
        from app.services.pipeline_service import load_pipeline_config

        with pytest.raises(InvalidParameterError):
            load_pipeline_config({"input_path": "x.csv"})

    @pytest.mark.slow
    def test_thermography_preset_on_pillar_phantom(self, tmp_path):
        """Thermography preset on a 128x128 pillar: at least 97% agreement with the truth."""
        from app.services.image_io_service import write_image
        from app.services.pipeline_service import phantom, resample_mask, run_pipeline
        from app.services.segmentation_service import mask_agreement

        generated = phantom("pillar", (128, 128), seed=4)
        path = write_image(generated.image, tmp_path / "pillar.csv")
        run = run_pipeline(make_config(path, tmp_path / "run", preset="paper-thermo", threads=None))
        assert run.report.enhance.kernel == "jackson:12:1"
        assert run.report.enhance.output_shape == [256, 256]
        assert mask_agreement(run.mask, resample_mask(generated.truth, run.mask.shape)) >= 0.97

    @pytest.mark.slow
    def test_thermography_preset_on_joint_phantom(self, tmp_path):
        """Thermography preset on a 128x128 beam-pillar joint."""
        from app.services.image_io_service import write_image
        from app.services.pipeline_service import phantom, resample_mask, run_pipeline
        from app.services.segmentation_service import mask_agreement

        generated = phantom("beam_pillar_joint", (128, 128), seed=2)
        path = write_image(generated.image, tmp_path / "joint.csv")
        run = run_pipeline(make_config(path, tmp_path / "run", preset="paper-thermo", threads=None))
        assert run.report.enhance.output_shape == [256, 256]
        assert mask_agreement(run.mask, resample_mask(generated.truth, run.mask.shape)) >= 0.97

    @pytest.mark.slow
    def test_thermogram_size(self, tmp_path):
        """A 320x240 thermogram becomes a 640x480 mask."""
        from app.services.image_io_service import write_image
        from app.services.pipeline_service import phantom, run_pipeline

        generated = phantom("pillar", (320, 240), seed=3)
        path = write_image(generated.image, tmp_path / "big.csv")
        run = run_pipeline(make_config(path, tmp_path / "run", threads=None))
        assert run.mask.shape == (640, 480)
