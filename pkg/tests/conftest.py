import pytest

from xplain.models import LogisticModel


@pytest.fixture
def two_feature_logistic():
    # class-1 log-odds 2*x1 - x2
    return LogisticModel.binary([2.0, -1.0])


@pytest.fixture
def write_csv(tmp_path):
    def _write(text, name="d.csv"):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path
    return _write
