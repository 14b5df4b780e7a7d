"""Terminal spinner on standard error for long computations."""

import sys
import threading
import time
from collections.abc import Iterator
from contextlib import contextmanager
from typing import TextIO

# ANSI escape sequences for cursor control
_HIDE_CURSOR = "\033[?25l"
_SHOW_CURSOR = "\033[?25h"

FRAMES = ("⠋", "⠙", "⠹", "⠸", "⠼", "⠴", "⠦", "⠧", "⠇", "⠏")


@contextmanager
def spinner(
    message: str, *, stream: TextIO | None = None, enabled: bool | None = None
) -> Iterator[None]:
    """Animate a spinner next to ``message`` while the block runs.

    Writes to ``stream`` (standard error by default) and stays silent unless
    the stream is a TTY or ``enabled`` is forced on, so piped output and
    logs are never interleaved with frames.

    Usage:
        with spinner("Enumerating orbit"):
            enumerate_orbit(group, params)
    """
    out = sys.stderr if stream is None else stream
    if enabled is None:
        enabled = out.isatty()
    if not enabled:
        yield
        return

    stop_event = threading.Event()

    def animate() -> None:
        frame = 0
        while not stop_event.is_set():
            out.write(f"\r  {FRAMES[frame % len(FRAMES)]} {message}")
            out.flush()
            frame += 1
            time.sleep(0.08)

    out.write(_HIDE_CURSOR)
    out.flush()
    thread = threading.Thread(target=animate, daemon=True)
    thread.start()
    try:
        yield
    finally:
        stop_event.set()
        thread.join(timeout=0.2)
        out.write("\r" + " " * (len(message) + 6) + "\r")
        out.write(_SHOW_CURSOR)
        out.flush()
