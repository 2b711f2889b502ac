"""Cross detector backed by a child process (for example a trained model).

Protocol: one JSON object per line on the child's stdin,
``{"image_ref": "<path>"}``, answered by one line on its stdout,
``{"boxes": [{"x":..,"y":..,"w":..,"h":..,"conf":..}]}``.
"""

from __future__ import annotations

import json
import os
import subprocess
import tempfile
import threading

import numpy as np
from PIL import Image

from ..errors import ServiceError
from .boxes import DetectionBox


class ExternalDetector:
    name = "external"

    def __init__(self, command, name=None, env=None):
        if isinstance(command, str):
            command = [command]
        self.command = list(command)
        if name:
            self.name = name
        self._env = env
        self._proc = None
        self._lock = threading.Lock()
        self._tmp = tempfile.TemporaryDirectory(prefix="madroid-ext-")
        self._counter = 0

    def _ensure(self):
        if self._proc is None or self._proc.poll() is not None:
            try:
                self._proc = subprocess.Popen(
                    self.command,
                    stdin=subprocess.PIPE,
                    stdout=subprocess.PIPE,
                    text=True,
                    encoding="utf-8",
                    env=self._env,
                )
            except OSError as exc:
                raise ServiceError(f"cannot start external detector {self.command[0]}: {exc}") from exc
        return self._proc

    def _image_ref(self, image):
        if isinstance(image, (str, os.PathLike)):
            return os.fspath(image)
        self._counter += 1
        path = os.path.join(self._tmp.name, f"img{self._counter}.png")
        Image.fromarray(np.asarray(image, dtype=np.uint8)).save(path)
        return path

    def detect(self, image):
        with self._lock:
            ref = self._image_ref(image)
            proc = self._ensure()
            try:
                proc.stdin.write(json.dumps({"image_ref": ref}) + "\n")
                proc.stdin.flush()
                line = proc.stdout.readline()
            except (OSError, ValueError) as exc:
                raise ServiceError(f"external detector pipe failed: {exc}") from exc
            if not line:
                self._proc = None
                try:
                    code = proc.wait(timeout=5)
                except subprocess.TimeoutExpired:
                    proc.kill()
                    code = proc.wait()
                raise ServiceError(f"external detector exited (code {code})")
        try:
            doc = json.loads(line)
            return [
                DetectionBox(int(b["x"]), int(b["y"]), int(b["w"]), int(b["h"]), float(b["conf"]))
                for b in doc["boxes"]
            ]
        except (ValueError, KeyError, TypeError) as exc:
            raise ServiceError(f"malformed external detector response: {line.strip()[:200]}") from exc

    def close(self):
        with self._lock:
            if self._proc is not None and self._proc.poll() is None:
                self._proc.stdin.close()
                try:
                    self._proc.wait(timeout=5)
                except subprocess.TimeoutExpired:
                    self._proc.kill()
            self._proc = None
        self._tmp.cleanup()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
