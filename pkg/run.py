#!/usr/bin/env python3
"""Entry point: ``python run.py <command> ...`` (see ``python run.py --help``)."""
import sys
from pathlib import Path

# Add project root to path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from src.cli import main

if __name__ == '__main__':
    sys.exit(main())
