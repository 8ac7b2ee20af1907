"""Isolated execution of generated plotting scripts.

Each run gets a fresh temporary workdir and a child process with a minimal
environment, a memory cap, and a wall-clock timeout. A prologue forces the
non-interactive rendering backend; an epilogue saves every open figure (the
last-created one wins) with the figure's drawable text embedded as PNG
metadata for downstream text extraction.
"""

from __future__ import annotations

import os
import re
import shutil
import signal
import subprocess
import sys
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

from .errors import InfrastructureError

STDERR_TAIL_BYTES = 4096
PNG_TEXT_KEY = "chart-text"

# Best-effort defense in depth on top of process isolation; documented as
# not a security boundary against a determined adversary.
UNSAFE_PATTERNS: tuple[tuple[str, re.Pattern], ...] = tuple(
    (reason, re.compile(pattern))
    for reason, pattern in [
        ("process spawn", r"\bimport\s+subprocess\b|\bsubprocess\s*\."),
        ("process spawn", r"\bos\s*\.\s*(system|popen|exec[lv]p?e?|spawn)"),
        ("process spawn", r"\bimport\s+pty\b|\bimport\s+multiprocessing\b"),
        ("network access", r"\bimport\s+socket\b|\bsocket\s*\.\s*socket"),
        ("network access", r"\bimport\s+(urllib|requests|httpx|http\.client|ftplib|smtplib)\b"),
        ("filesystem escape", r"\bshutil\s*\.\s*rmtree"),
        ("filesystem escape", r"(['\"])(/etc/|/proc/|/sys/|~/)"),
        ("filesystem escape", r"\.\./"),
    ]
)


def prescreen(code: str) -> str | None:
    """Return a rejection reason if the code matches the deny-list, else None."""
    for reason, pattern in UNSAFE_PATTERNS:
        if pattern.search(code):
            return f"{reason} ({pattern.pattern})"
    return None


@dataclass(frozen=True)
class SandboxLimits:
    wall_timeout: float = 60.0
    memory_cap: int = 1 << 30
    dpi: int = 100
    interpreter: str = sys.executable
    retain_workdir: bool = False
    workdir_root: str | None = None

    def __post_init__(self) -> None:
        if self.wall_timeout <= 0:
            raise ValueError("wall_timeout must be positive")

    def config_key(self) -> str:
        """Stable string identifying everything that can change the output."""
        return f"timeout={self.wall_timeout}|mem={self.memory_cap}|dpi={self.dpi}"


@dataclass(frozen=True)
class RenderOutcome:
    status: str  # success | runtime_error | timeout | no_figure | unsafe_rejected
    image_bytes: bytes | None
    stderr_tail: str
    duration: float
    figure_count: int = 0
    image_size: tuple[int, int] | None = None
    network_guard: str = "pre-screen"


_PROLOGUE = """\
import resource as _resource
_resource.setrlimit(_resource.RLIMIT_AS, ({memory_cap}, {memory_cap}))
_resource.setrlimit(_resource.RLIMIT_CORE, (0, 0))
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as _chartcycle_plt
_chartcycle_plt.show = lambda *a, **k: None
"""

_EPILOGUE = """
import json as _chartcycle_json
import matplotlib.pyplot as _chartcycle_plt
import matplotlib.text as _chartcycle_text
for _chartcycle_i, _chartcycle_num in enumerate(_chartcycle_plt.get_fignums(), start=1):
    _chartcycle_fig = _chartcycle_plt.figure(_chartcycle_num)
    _chartcycle_fig.canvas.draw()
    _chartcycle_texts = sorted({{
        _t.get_text().strip()
        for _t in _chartcycle_fig.findobj(_chartcycle_text.Text)
        if _t.get_text().strip()
    }})
    _chartcycle_fig.savefig(
        "figure-%03d.png" % _chartcycle_i,
        dpi={dpi},
        metadata={{"{png_key}": _chartcycle_json.dumps(_chartcycle_texts, ensure_ascii=False)}},
    )
"""


def _child_env(workdir: Path) -> dict[str, str]:
    return {
        "PATH": os.environ.get("PATH", "/usr/bin:/bin"),
        "HOME": str(workdir),
        "TMPDIR": str(workdir),
        "MPLBACKEND": "Agg",
        "MPLCONFIGDIR": str(workdir / ".mplconfig"),
        "PYTHONDONTWRITEBYTECODE": "1",
        "PYTHONHASHSEED": "0",
        "LANG": "C.UTF-8",
    }


class RenderSandbox:
    """Executes scripts one child process at a time; instances are reusable."""

    def __init__(self, limits: SandboxLimits | None = None):
        self.limits = limits or SandboxLimits()
        self.call_count = 0

    def execute(self, code: str) -> RenderOutcome:
        return execute(code, self.limits, _counter=self)


def execute(code: str, limits: SandboxLimits | None = None, _counter=None) -> RenderOutcome:
    """Run a plotting script under the given limits; never raises for script bugs."""
    limits = limits or SandboxLimits()
    if not code.strip():
        raise ValueError("code must be non-empty")
    if _counter is not None:
        _counter.call_count += 1

    reason = prescreen(code)
    if reason is not None:
        return RenderOutcome(
            status="unsafe_rejected",
            image_bytes=None,
            stderr_tail=reason,
            duration=0.0,
        )

    interpreter = limits.interpreter
    if not Path(interpreter).exists():
        raise InfrastructureError(f"sandbox interpreter not found: {interpreter}")

    workdir = Path(tempfile.mkdtemp(prefix="render-", dir=limits.workdir_root))
    script = (
        _PROLOGUE.format(memory_cap=limits.memory_cap)
        + "\n"
        + code
        + "\n"
        + _EPILOGUE.format(dpi=limits.dpi, png_key=PNG_TEXT_KEY)
    )
    script_path = workdir / "script.py"
    script_path.write_text(script, encoding="utf-8")

    started = time.monotonic()
    try:
        proc = subprocess.Popen(
            [interpreter, str(script_path)],
            cwd=workdir,
            env=_child_env(workdir),
            stdout=subprocess.DEVNULL,
            stderr=subprocess.PIPE,
            start_new_session=True,
        )
        try:
            _, stderr = proc.communicate(timeout=limits.wall_timeout)
        except subprocess.TimeoutExpired:
            try:
                os.killpg(proc.pid, signal.SIGKILL)
            except ProcessLookupError:
                pass
            proc.communicate()
            return RenderOutcome(
                status="timeout",
                image_bytes=None,
                stderr_tail=f"killed after {limits.wall_timeout}s wall timeout",
                duration=time.monotonic() - started,
            )
        duration = time.monotonic() - started
        tail = stderr[-STDERR_TAIL_BYTES:].decode("utf-8", errors="replace")
        if proc.returncode != 0:
            if not tail.strip():
                tail = f"process exited with status {proc.returncode}"
            return RenderOutcome(
                status="runtime_error",
                image_bytes=None,
                stderr_tail=tail,
                duration=duration,
            )
        figures = sorted(workdir.glob("figure-*.png"))
        if not figures:
            return RenderOutcome(
                status="no_figure",
                image_bytes=None,
                stderr_tail=tail,
                duration=duration,
            )
        image_bytes = figures[-1].read_bytes()
        return RenderOutcome(
            status="success",
            image_bytes=image_bytes,
            stderr_tail=tail,
            duration=duration,
            figure_count=len(figures),
            image_size=_png_size(image_bytes),
        )
    finally:
        if not limits.retain_workdir:
            shutil.rmtree(workdir, ignore_errors=True)


def _png_size(data: bytes) -> tuple[int, int] | None:
    # IHDR is always the first chunk: width/height at byte offsets 16..24.
    if len(data) < 24 or data[:8] != b"\x89PNG\r\n\x1a\n":
        return None
    return (
        int.from_bytes(data[16:20], "big"),
        int.from_bytes(data[20:24], "big"),
    )


def read_embedded_text(image: bytes | str | Path) -> list[str] | None:
    """Read the figure-text list the epilogue embeds into rendered PNGs."""
    import io
    import json

    from PIL import Image

    if isinstance(image, (str, Path)):
        img = Image.open(image)
    else:
        img = Image.open(io.BytesIO(image))
    text = getattr(img, "text", {}).get(PNG_TEXT_KEY)
    if text is None:
        return None
    return json.loads(text)
