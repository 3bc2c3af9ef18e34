"""Service for cleaning up experiment outputs and test artifacts."""
import logging
import shutil
from pathlib import Path
from typing import Optional

logger = logging.getLogger(__name__)


class CleanupService:
    """Removes the CSV files written by sampling runs, experiments and tests."""

    OUTPUT_PATTERNS = ('*.csv',)

    def __init__(self, outputs_dir: Optional[str] = None):
        """
        Initialize cleanup service.

        Args:
            outputs_dir: Directory holding run outputs (default: outputs/ at the project root)
        """
        if outputs_dir is None:
            project_root = Path(__file__).parent.parent.parent
            outputs_dir = project_root / "outputs"
        self.outputs_dir = Path(outputs_dir)

    def cleanup_outputs(self, keep_latest: bool = False) -> int:
        """
        Remove output CSV files directly under the outputs directory.

        Args:
            keep_latest: If True, keep the most recently written file

        Returns the number of files removed.
        """
        if not self.outputs_dir.exists():
            return 0
        files = [f for pattern in self.OUTPUT_PATTERNS for f in self.outputs_dir.glob(pattern)]
        if keep_latest and files:
            files.sort(key=lambda f: f.stat().st_mtime, reverse=True)
            files = files[1:]
        for f in files:
            f.unlink()
        return len(files)

    def cleanup_run_dirs(self) -> int:
        """Remove experiment subdirectories (one per scenario run)."""
        if not self.outputs_dir.exists():
            return 0
        dirs = [d for d in self.outputs_dir.iterdir() if d.is_dir()]
        for d in dirs:
            shutil.rmtree(d)
        return len(dirs)

    def cleanup_everything(self, keep_latest: bool = False):
        removed = self.cleanup_outputs(keep_latest=keep_latest) + self.cleanup_run_dirs()
        if removed:
            logger.info("removed %d output entries from %s", removed, self.outputs_dir)
        return removed
