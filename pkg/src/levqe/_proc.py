"""Line-based request/response channel to a child process.

Shared by the external translator and scorer adapters. Pipes are
unbuffered and reads go through ``select`` with a deadline, so a child
that violates the one-flushed-line-per-request protocol surfaces as a
timeout instead of a hang.
"""

from __future__ import annotations

import os
import select
import shlex
import subprocess
import time
from typing import Optional


class ChannelError(RuntimeError):
    """The child process broke the line protocol (EOF, timeout, I/O)."""


class LineChannel:
    def __init__(self, command: str, timeout: float = 60.0):
        self.command = command
        self.timeout = timeout
        self._proc: Optional[subprocess.Popen] = None
        self._buf = bytearray()

    def _ensure(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(
                shlex.split(self.command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                bufsize=0,
            )
            self._buf = bytearray()
        return self._proc

    def request(self, line: str) -> str:
        """Send one line, return the child's next output line."""
        proc = self._ensure()
        try:
            proc.stdin.write((line + "\n").encode("utf-8"))
            proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            self.close(kill=True)
            raise ChannelError(f"process I/O failed: {exc}") from exc
        return self._read_line(proc)

    def _read_line(self, proc: subprocess.Popen) -> str:
        deadline = time.monotonic() + self.timeout
        while True:
            newline = self._buf.find(b"\n")
            if newline >= 0:
                line = bytes(self._buf[: newline])
                del self._buf[: newline + 1]
                return line.decode("utf-8")
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                self.close(kill=True)
                raise ChannelError(
                    f"no response line within {self.timeout:.0f}s "
                    "(is the process flushing one line per request?)"
                )
            ready, _, _ = select.select([proc.stdout], [], [], remaining)
            if not ready:
                continue
            chunk = os.read(proc.stdout.fileno(), 65536)
            if not chunk:
                self.close(kill=True)
                raise ChannelError("process closed its output")
            self._buf.extend(chunk)

    def close(self, kill: bool = False) -> None:
        proc, self._proc = self._proc, None
        self._buf = bytearray()
        if proc is None or proc.poll() is not None:
            return
        if kill:
            proc.kill()
            proc.wait()
            return
        try:
            proc.stdin.close()
            proc.wait(timeout=10)
        except (OSError, subprocess.TimeoutExpired):
            proc.kill()
            proc.wait()
