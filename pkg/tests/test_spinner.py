"""Tests for thinsieve.spinner module."""

import io
import sys
import time
from unittest.mock import patch

import pytest

from thinsieve.spinner import _HIDE_CURSOR, _SHOW_CURSOR, FRAMES, spinner


class TestSpinnerCursorControl:
    """Tests for spinner cursor visibility control."""

    def test_hides_and_shows_cursor(self) -> None:
        """Cursor is hidden on entry and restored on exit."""
        output = io.StringIO()

        with spinner("Counting", stream=output, enabled=True):
            assert _HIDE_CURSOR in output.getvalue()

        assert output.getvalue().endswith(_SHOW_CURSOR)

    def test_shows_cursor_on_exception(self) -> None:
        """Cursor is restored when the block raises."""
        output = io.StringIO()

        with pytest.raises(ValueError):
            with spinner("Counting", stream=output, enabled=True):
                raise ValueError("boom")

        assert _SHOW_CURSOR in output.getvalue()

    def test_shows_cursor_on_keyboard_interrupt(self) -> None:
        """Cursor is restored on CTRL+C."""
        output = io.StringIO()

        with pytest.raises(KeyboardInterrupt):
            with spinner("Counting", stream=output, enabled=True):
                raise KeyboardInterrupt()

        assert _SHOW_CURSOR in output.getvalue()


class TestSpinnerAnimation:
    """Tests for spinner frames and TTY detection."""

    def test_draws_frames_with_message(self) -> None:
        """Frames are drawn next to the message while the block runs."""
        output = io.StringIO()

        with spinner("Factoring", stream=output, enabled=True):
            time.sleep(0.25)

        text = output.getvalue()
        assert "Factoring" in text
        assert FRAMES[0] in text
        assert FRAMES[1] in text

    def test_silent_when_not_a_tty(self) -> None:
        """A non-TTY stream gets no output at all."""
        output = io.StringIO()

        with spinner("Factoring", stream=output):
            pass

        assert output.getvalue() == ""

    def test_defaults_to_stderr(self) -> None:
        """Without a stream the spinner writes to standard error."""
        err = io.StringIO()

        with patch.object(sys, "stderr", err):
            with spinner("Factoring", enabled=True):
                pass

        assert _HIDE_CURSOR in err.getvalue()
