import logging
import sys
from pathlib import Path

import pandas as pd

logger = logging.getLogger(__name__)

STDOUT = '-'


def write_csv(dataframe: pd.DataFrame, destination: str, summary_line: str = None) -> None:
    """
    Write a DataFrame as CSV with a fixed header and round-trip float precision.

    Args:
        dataframe: table to write; the column order is the header
        destination: file path, or '-' for stdout
        summary_line: optional trailing line appended after the rows
    """
    text = dataframe.to_csv(index=False, lineterminator='\n')
    if summary_line is not None:
        text += summary_line + '\n'

    if destination == STDOUT:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    path = Path(destination)
    path.parent.mkdir(parents=True, exist_ok=True)
    # newline='' keeps '\n' on every platform so reruns are byte-identical
    with open(path, 'w', newline='') as handle:
        handle.write(text)
    logger.info("Wrote %d rows to %s", len(dataframe), path)


def companion_path(destination: str, suffix: str) -> str:
    """'runs/counts.csv' + '.report.csv' -> 'runs/counts.report.csv'."""

    return str(Path(destination).with_suffix(suffix))
