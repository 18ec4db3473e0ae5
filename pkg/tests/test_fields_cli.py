import numpy as np
import pytest

from hiertax.cli import EXIT_IO, EXIT_OK, EXIT_VALIDATION, main
from hiertax.coherence import expand_labels, propagate
from hiertax.fields import (
    IGNORE,
    FieldFormatError,
    LabelField,
    ScoreField,
    read_label_field,
    read_score_field,
    write_label_field,
    write_score_field,
)

from conftest import TAX_DIR

PPP = f"{TAX_DIR}/pascal_person_part.tax"


class TestFieldFormats:
    def test_score_roundtrip(self, tmp_path):
        rng = np.random.default_rng(0)
        field = ScoreField(rng.uniform(0, 1, size=(3, 4, 5)).astype(np.float32).astype(np.float64))
        path = tmp_path / "f.hssf"
        write_score_field(path, field)
        back = read_score_field(path)
        assert np.array_equal(back.scores, field.scores)

    def test_label_roundtrip(self, tmp_path):
        field = LabelField(np.array([[1, IGNORE], [2, 3]], dtype=np.uint32))
        path = tmp_path / "f.hslf"
        write_label_field(path, field)
        back = read_label_field(path)
        assert np.array_equal(back.leaf, field.leaf)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.hssf"
        path.write_bytes(b"NOPE" + b"\x00" * 32)
        with pytest.raises(FieldFormatError, match="magic"):
            read_score_field(path)

    def test_truncated(self, tmp_path):
        path = tmp_path / "cut.hslf"
        path.write_bytes(b"HSLF" + np.array([2, 2], dtype="<u4").tobytes() + b"\x00" * 4)
        with pytest.raises(FieldFormatError, match="truncated"):
            read_label_field(path)

    def test_score_range_validated(self):
        with pytest.raises(ValueError, match="\\[0, 1\\]"):
            ScoreField(np.full((1, 1, 2), 1.5))


class TestCli:
    def test_validate_taxonomy_ok(self, capsys):
        assert main(["validate-taxonomy", PPP]) == EXIT_OK
        out = capsys.readouterr().out
        assert "nodes: 11" in out and "height: 3" in out
        assert "level 1: 7 classes" in out

    def test_validate_taxonomy_bad_file(self, tmp_path, capsys):
        bad = tmp_path / "bad.tax"
        bad.write_text("root\ta\nroot\tb\n")
        assert main(["validate-taxonomy", str(bad)]) == EXIT_VALIDATION

    def test_missing_file_is_usage_error(self, tmp_path):
        assert main(["validate-taxonomy", str(tmp_path / "nope.tax")]) == EXIT_VALIDATION

    def test_propagate_decode_eval_pipeline(self, tmp_path, tiny_tax_file, tiny):
        rng = np.random.default_rng(1)
        scores = ScoreField(rng.uniform(0, 1, size=(4, 4, len(tiny))))
        gt = LabelField(rng.choice(tiny.leaves, size=(4, 4)).astype(np.uint32))
        s_path, g_path = tmp_path / "s.hssf", tmp_path / "g.hslf"
        write_score_field(s_path, scores)
        write_label_field(g_path, gt)

        p_path = tmp_path / "p.hssf"
        assert main(["propagate", "--tax", tiny_tax_file, "--scores", str(s_path),
                     "--labels", str(g_path), "--out", str(p_path)]) == EXIT_OK
        prop = read_score_field(p_path)
        expect = propagate(tiny, scores.scores[0, 0], expand_labels(tiny, int(gt.leaf[0, 0])))
        assert np.allclose(prop.scores[0, 0], expect.astype(np.float32))

        d_path = tmp_path / "pred.hslf"
        assert main(["decode", "--tax", tiny_tax_file, "--scores", str(s_path),
                     "--out", str(d_path)]) == EXIT_OK

        csv_path = tmp_path / "report.csv"
        assert main(["eval", "--tax", tiny_tax_file, "--pred", str(d_path),
                     "--gt", str(g_path), "--csv", str(csv_path)]) == EXIT_OK
        text = csv_path.read_text()
        assert text.startswith("level,class,iou")
        assert "mIoU" in text

    def test_corrupt_field_is_io_error(self, tmp_path, tiny_tax_file):
        bad = tmp_path / "bad.hssf"
        bad.write_bytes(b"JUNKJUNKJUNKJUNK")
        out = tmp_path / "o.hslf"
        assert main(["decode", "--tax", tiny_tax_file, "--scores", str(bad),
                     "--out", str(out)]) == EXIT_IO

    def test_gradcheck_command(self, capsys):
        assert main(["gradcheck", "--loss", "ftm", "--trials", "10", "--seed", "3"]) == EXIT_OK
        assert "max relative error" in capsys.readouterr().out


@pytest.fixture
def tiny_tax_file(tmp_path):
    path = tmp_path / "tiny.tax"
    path.write_text("root\tR\nR\tA\nR\tB\nA\ta1\nA\ta2\n")
    return str(path)
