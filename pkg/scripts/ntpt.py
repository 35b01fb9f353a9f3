#!/usr/bin/env python
"""Run the ntpt command line from a source checkout.

Usage:
    uv run python scripts/ntpt.py selftest
    uv run python scripts/ntpt.py train --scenario add2x2:top --out runs/top
    uv run python scripts/ntpt.py eval runs/math --lengths 1..16
"""

import sys
from pathlib import Path

# Add project root to path for imports
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from src.cli import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())
