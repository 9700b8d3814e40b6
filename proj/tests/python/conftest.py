import os
import sys
from glob import glob
from pathlib import Path

REPO_ROOT = Path(__file__).resolve().parents[2]

# The compiled extension lives in the CMake build tree during development;
# installed wheels put it inside the package instead.
_candidates = [os.environ.get("NETMOE_PYMODULE_DIR", "")]
_candidates += glob(str(REPO_ROOT / "build*" / "bindings"))
for c in _candidates:
    if c and Path(c).is_dir():
        sys.path.insert(0, c)
        break
sys.path.insert(0, str(REPO_ROOT / "python"))
