"""Plain-text / CSV ingestion and output of one-column series."""

import io
import os
from typing import Dict, Iterable, Optional
import numpy as np
import pandas as pd
from src.core.errors import InvalidSeries, SeriesReadError
from src.core.models import TimeSeries
from src.utils.logger import setup_logger

logger = setup_logger('series_io')


def _is_number(token: str) -> bool:
    try:
        float(token)
        return True
    except ValueError:
        return False


def read_series(path: str) -> TimeSeries:
    """Read one real value per line. A non-numeric first line is a header; '#' lines are comments."""
    try:
        with open(path, 'r', encoding='utf-8') as handle:
            text = handle.read()
    except UnicodeDecodeError as e:
        raise InvalidSeries(f"{path}: not UTF-8 text (byte {e.start})") from e
    except OSError as e:
        raise SeriesReadError(f"cannot read {path}: {e.strerror or e}") from e

    lines = [line for line in text.splitlines() if line.strip() and not line.lstrip().startswith('#')]
    if not lines:
        raise InvalidSeries(f"{path} contains no observations")

    first_field = lines[0].split(',')[0].strip()
    header = 0 if not _is_number(first_field) else None
    if header is not None:
        logger.debug(f"Header detected in {path}: {lines[0]!r}")

    try:
        frame = pd.read_csv(io.StringIO('\n'.join(lines)), header=header, usecols=[0],
                            float_precision='round_trip')
    except (ValueError, pd.errors.ParserError) as e:
        raise InvalidSeries(f"{path}: {e}") from e

    column = pd.to_numeric(frame.iloc[:, 0], errors='coerce')
    if column.isna().any():
        bad = int(np.flatnonzero(column.isna().to_numpy())[0])
        raise InvalidSeries(f"{path}: non-numeric value at data row {bad + 1}")

    series = TimeSeries(column.to_numpy(dtype=float))
    logger.info(f"Loaded {series.n} observations from {os.path.basename(path)}")
    return series


def format_series(values: Iterable[float], metadata: Optional[Dict[str, object]] = None) -> str:
    """Render values one per line, preceded by '# key: value' comment lines"""
    lines = []
    for key, value in (metadata or {}).items():
        lines.append(f"# {key}: {value}")
    lines.extend(repr(float(v)) for v in values)
    return '\n'.join(lines) + '\n'


def write_series(path: str, values: Iterable[float], metadata: Optional[Dict[str, object]] = None) -> None:
    """Write format_series output, creating the parent directory"""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as handle:
        handle.write(format_series(values, metadata))
