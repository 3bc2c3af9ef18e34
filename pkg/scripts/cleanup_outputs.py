#!/usr/bin/env python3
"""Script to clean up experiment outputs - chain, coverage and diagnostics CSVs."""
import argparse
import sys
from pathlib import Path

# Add project root to path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from src.services.cleanup_service import CleanupService


def main():
    """Clean up all output files."""
    parser = argparse.ArgumentParser(description="Remove experiment outputs")
    parser.add_argument("--outputs-dir", default=None, help="Defaults to outputs/ at the project root")
    parser.add_argument("--keep-latest", action="store_true", help="Keep the newest CSV file")
    args = parser.parse_args()

    cleanup = CleanupService(args.outputs_dir)
    print("Cleaning up outputs...")
    print(f"Outputs directory: {cleanup.outputs_dir}")

    removed = cleanup.cleanup_outputs(keep_latest=args.keep_latest)
    print(f"✓ {removed} CSV files removed")

    removed = cleanup.cleanup_run_dirs()
    print(f"✓ {removed} run directories removed")


if __name__ == '__main__':
    main()
