import numpy as np
import pytest

from pjx import utils


def test_shape_str():
    assert utils.shape_str(np.zeros(3), np.zeros((2, 2))) == "(3,) and (2, 2)"
    assert utils.shape_str(1.0) == "()"


def test_standard_error():
    se, single = utils.standard_error([1.0, 2.0, 3.0, 4.0])
    assert se == pytest.approx(np.std([1, 2, 3, 4], ddof=1) / 2.0)
    assert not single
    with pytest.warns(UserWarning, match="single instance"):
        assert utils.standard_error([5.0]) == (0.0, True)
    assert utils.standard_error([]) == (0.0, True)


def test_fingerprint():
    assert utils.fingerprint(["a", "b"]) == utils.fingerprint(["a", "b"])
    assert utils.fingerprint(["a", "b"]) != utils.fingerprint(["b", "a"])
    assert utils.fingerprint(["ab"]) != utils.fingerprint(["a", "b"])
    assert len(utils.fingerprint([])) == 16


def test_record_validation_error():
    rejections = [utils.RecordRejection(3, "split", "bad"), utils.RecordRejection(5, None, "invalid JSON")]
    error = utils.RecordValidationError(rejections, "records.jsonl")
    assert str(error) == "2 invalid record(s) in records.jsonl: line 3 field 'split': bad; line 5: invalid JSON"
    assert error.rejections == rejections
    assert isinstance(error, ValueError)


def test_error_hierarchy():
    assert issubclass(utils.CorruptTensorFileError, utils.TensorFileError)
    assert issubclass(utils.TensorRankError, utils.TensorFileError)
    for error in (utils.ShapeError, utils.ContractError, utils.VocabularyError, utils.ConfigError):
        assert issubclass(error, ValueError)


def test_generator_to_decorator():
    calls = []

    def around():
        calls.append("enter")
        yield
        calls.append("exit")

    @utils.generator_to_decorator(around)
    def add(a, b=1):
        """Adds."""
        calls.append("call")
        return a + b

    assert add(2, b=3) == 5
    assert calls == ["enter", "call", "exit"]
    assert add.__doc__ == "Adds."
