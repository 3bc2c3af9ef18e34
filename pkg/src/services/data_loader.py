"""Service for reading and writing observations, chains and summaries as CSV."""
import logging
from pathlib import Path
from typing import Iterable, List, Optional, Union

import numpy as np
import pandas as pd

from src.models.chain import Chain
from src.models.errors import DimensionMismatchError
from src.models.summary import DiagnosticsReport, FunctionalInterval, PosteriorSummary

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


class DataLoader:
    """Handles CSV files for the sampler: one row per observation or per chain state."""

    FLOAT_FORMAT = '%.17g'

    def __init__(self, data_dir: Optional[PathLike] = None):
        if data_dir is None:
            # Default to project root/data
            project_root = Path(__file__).parent.parent.parent
            data_dir = project_root / "data"
        self.data_dir = Path(data_dir)

    def _resolve(self, filename: PathLike) -> Path:
        path = Path(filename)
        return path if path.is_absolute() or path.exists() else self.data_dir / path

    def _prepare(self, filename: PathLike) -> Path:
        path = Path(filename)
        path.parent.mkdir(parents=True, exist_ok=True)
        return path

    # ------------------------------------------------------------------
    # Observations
    # ------------------------------------------------------------------

    def load_observations(self, filename: PathLike, width: Optional[int] = None) -> np.ndarray:
        """Observations as an (n, width) array; matrices are column-vectorized.

        A header row is detected and skipped when its first field is not numeric.
        """
        path = self._resolve(filename)
        if not path.exists():
            raise FileNotFoundError(f"observation file not found: {path}")
        lines = path.read_text(encoding='utf-8').splitlines()
        if not lines:
            raise ValueError(f"{path} is empty")
        first = lines[0].split(',')[0].strip()
        try:
            float(first)
            header = None
        except ValueError:
            header = 0
        frame = pd.read_csv(path, header=header)
        data = frame.to_numpy(dtype=float)
        if width is not None and data.shape[1] != width:
            raise DimensionMismatchError(f"{path} has {data.shape[1]} columns, expected {width}")
        if not np.all(np.isfinite(data)):
            raise ValueError(f"{path} contains missing or non-finite values")
        logger.info("loaded %d observations of width %d from %s", data.shape[0], data.shape[1], path)
        return data

    def save_observations(self, data: np.ndarray, filename: PathLike) -> Path:
        data = np.atleast_2d(np.asarray(data, dtype=float))
        frame = pd.DataFrame(data, columns=[f'x{j + 1}' for j in range(data.shape[1])])
        path = self._prepare(filename)
        frame.to_csv(path, index=False, float_format=self.FLOAT_FORMAT)
        return path

    # ------------------------------------------------------------------
    # Chains
    # ------------------------------------------------------------------

    def save_chain_csv(self, chain: Chain, filename: PathLike) -> Path:
        """``iter,accepted,x1..xD`` with 17 significant digits."""
        path = self._prepare(filename)
        chain.to_frame().to_csv(path, index=False, float_format=self.FLOAT_FORMAT)
        logger.info("wrote %d states to %s", len(chain), path)
        return path

    def load_chain_csv(self, filename: PathLike) -> Chain:
        path = self._resolve(filename)
        if not path.exists():
            raise FileNotFoundError(f"chain file not found: {path}")
        return Chain.from_frame(pd.read_csv(path))

    def load_chains(self, filenames: Iterable[PathLike]) -> List[Chain]:
        return [self.load_chain_csv(f) for f in filenames]

    # ------------------------------------------------------------------
    # Summaries
    # ------------------------------------------------------------------

    def save_summary_csv(self, summary: PosteriorSummary, filename: PathLike) -> Path:
        path = self._prepare(filename)
        summary.to_frame().to_csv(path, index=False, float_format=self.FLOAT_FORMAT)
        return path

    def save_intervals_csv(self, intervals: List[FunctionalInterval], filename: PathLike) -> Path:
        path = self._prepare(filename)
        frame = pd.DataFrame([i.to_dict() for i in intervals], columns=['functional', 'alpha', 'lower', 'upper'])
        frame.to_csv(path, index=False, float_format=self.FLOAT_FORMAT)
        return path

    def save_diagnostics_csv(self, report: DiagnosticsReport, filename: PathLike) -> Path:
        path = self._prepare(filename)
        report.to_frame().to_csv(path, index=False, float_format=self.FLOAT_FORMAT)
        return path
