import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # make oracle/stubs importable

from tsadbench.core import SplitSpec, TimeSeries


@pytest.fixture
def make_series():
    """Build a TimeSeries with an explicit predefined split."""

    def build(values, labels, train_end=None, valid_end=None, id="s0"):
        n = len(values)
        if train_end is None:
            train_end = max(1, n * 2 // 5)
        if valid_end is None:
            valid_end = max(train_end + 1, n // 2)
        return TimeSeries(
            id=id,
            values=values,
            labels=labels,
            split=SplitSpec(train_end=train_end, valid_end=valid_end, source="predefined"),
        )

    return build


STUB_DIR = Path(__file__).parent / "stubs"
