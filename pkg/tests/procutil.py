"""Subprocess helpers for memory-sensitive tests.

ru_maxrss never resets on exec, so a process forked directly from a large
test runner starts with the runner's resident image as its recorded peak
(and this kernel exposes no VmHWM to prefer instead). Launching through a
small intermediate interpreter restores a clean baseline: the intermediate
execs (inheriting the big floor, which it ignores) and then forks the real
child from its own ~15 MiB image.
"""

import subprocess
import sys

_TRAMPOLINE = (
    "import subprocess, sys; "
    "sys.exit(subprocess.run(sys.argv[1:]).returncode)"
)


def run_lean(args, timeout=600):
    """Run ``args`` with a lean parent image so ru_maxrss is meaningful."""
    return subprocess.run(
        [sys.executable, "-c", _TRAMPOLINE, *args],
        capture_output=True,
        text=True,
        timeout=timeout,
    )
