"""Logging utilities for the extension toolkit."""

import time
import traceback
from typing import Optional, Callable


class Logger:
    """Simple logger that can output to console and an optional sink."""

    def __init__(self, sink: Optional[Callable] = None, debug_mode: bool = False, quiet: bool = False):
        self.sink = sink
        self.debug_mode = debug_mode
        self.quiet = quiet

    def _emit(self, message: str) -> None:
        if not self.quiet:
            print(message)
        if self.sink:
            try:
                self.sink(message)
            except Exception:
                # Sink might be closed
                pass

    def debug(self, message: str) -> None:
        """Log debug message."""
        if self.debug_mode:
            timestamp = time.strftime("%H:%M:%S")
            self._emit(f"[{timestamp}] DEBUG: {message}")

    def info(self, message: str) -> None:
        """Log info message."""
        self._emit(message)

    def warning(self, message: str) -> None:
        """Log warning message."""
        self._emit(f"WARNING: {message}")

    def error(self, message: str, exc: Optional[Exception] = None) -> None:
        """Log error message with optional exception."""
        error_msg = f"ERROR: {message}"
        if exc:
            error_msg += f" - {str(exc)}"

        self._emit(error_msg)

        if self.debug_mode and exc:
            self._emit(f"Traceback: {traceback.format_exc()}")

    def set_sink(self, callback: Optional[Callable]) -> None:
        """Set the sink callback for logging."""
        self.sink = callback


class StageTimer:
    """Context manager that logs how long a named stage took."""

    def __init__(self, logger: Optional[Logger], stage: str):
        self.logger = logger
        self.stage = stage
        self.elapsed = 0.0
        self._start = 0.0

    def __enter__(self) -> "StageTimer":
        self._start = time.perf_counter()
        if self.logger:
            self.logger.debug(f"Stage '{self.stage}' started")
        return self

    def __exit__(self, exc_type, exc, tb) -> bool:
        self.elapsed = time.perf_counter() - self._start
        if self.logger:
            status = "failed" if exc_type else "finished"
            self.logger.debug(f"Stage '{self.stage}' {status} in {self.elapsed:.3f} seconds")
        return False
