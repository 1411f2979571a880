"""
Shared test configuration.

Puts the repo root on sys.path so tests import the package as
`ampchannel` without installing it. The `slow` marker for the figure
reproductions is registered in pyproject.toml.
"""

import sys
from pathlib import Path

REPO_ROOT = Path(__file__).resolve().parent.parent

if str(REPO_ROOT) not in sys.path:
    sys.path.insert(0, str(REPO_ROOT))
