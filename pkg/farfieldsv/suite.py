#!/usr/bin/env python3

from __future__ import annotations

import hashlib
import json
import os
import pickle
import tempfile
import time
from datetime import timedelta
from typing import Any, Callable, Optional, Union

import numpy as np

import farfieldsv as fsv


class Suite:
    """
    farfieldsv suite helpers.
    Provides terminal messages, the artifact cache and content hashing
    shared by the other modules.

    """

    @staticmethod
    def intro() -> None:
        """
        Print the suite banner.

        """
        Suite.message(["farfieldsv\n", "far-field speaker verification\n"])
        Suite.message(f"SUITE VERSION: {fsv.__version__}")

    @staticmethod
    def cachedir(output: str = "") -> str:
        """
        Return the artifact cache directory, creating it when needed.
        The FSV_CACHE_DIR environment variable takes precedence over
        the provided output directory.

        Parameters:
            output : str
                Experiment output directory.

        Returns:
            Path of the cache directory.

        """
        directory = os.environ.get("FSV_CACHE_DIR")
        if not directory:
            directory = (
                os.path.join(output, "cache")
                if output
                else os.path.join(tempfile.gettempdir(), "farfieldsv")
            )
        os.makedirs(directory, exist_ok=True)
        return directory

    @staticmethod
    def contenthash(*items: Any) -> str:
        """
        MD5 hash over configuration dictionaries, strings, byte strings
        and arrays, in order.

        """
        md5 = hashlib.md5()
        for item in items:
            if isinstance(item, np.ndarray):
                md5.update(str(item.dtype).encode())
                md5.update(str(item.shape).encode())
                md5.update(np.ascontiguousarray(item).tobytes())
            elif isinstance(item, bytes):
                md5.update(item)
            elif isinstance(item, str):
                md5.update(item.encode())
            else:
                md5.update(json.dumps(item, sort_keys=True, default=str).encode())
            md5.update(b"\x00")
        return md5.hexdigest()

    @staticmethod
    def filehash(filename: str) -> str:
        """
        MD5 hash of a file's content.

        """
        md5 = hashlib.md5()
        with open(filename, "rb") as f:
            for chunk in iter(lambda: f.read(1 << 20), b""):
                md5.update(chunk)
        return md5.hexdigest()

    @staticmethod
    def cached(
        directory: str,
        key: str,
        stage: str,
        compute: Callable[[], Any],
        cache: bool = True,
    ) -> Any:
        """
        Restore an artifact from the pickle cache or compute and dump it.

        Parameters:
            directory : str
                Cache directory.
            key : str
                Content hash of the stage configuration and inputs.
            stage : str
                Stage name used in messages and the file name.
            compute : callable
                Produces the artifact when not cached.
            cache : bool
                Whether to use the cache.

        Returns:
            The artifact.

        """
        filename = os.path.join(directory, f"{stage}-{key}.pkl")

        if cache and os.path.isfile(filename) and os.access(filename, os.R_OK):
            Suite.message(f"RESTORING {stage.upper()} FROM CACHE")
            with open(filename, "rb") as f:
                return pickle.load(f)

        tstart = time.perf_counter()

        artifact = compute()

        if cache:
            with open(filename, "wb") as f:
                pickle.dump(artifact, f, pickle.HIGHEST_PROTOCOL)

        elapsed = timedelta(seconds=(time.perf_counter() - tstart))
        Suite.message(f"{stage.upper()} DONE IN {elapsed}")

        return artifact

    @staticmethod
    def header(kind: str, **items: Any) -> list[str]:
        """
        IPAC-table header keywords describing a written table.

        Parameters:
            kind : str
                Table type, e.g. the writing class name.
            items : keywords
                Additional header keywords.

        """
        import sys

        kv = {
            "CREATOR": f"Python {sys.version_info.major}.{sys.version_info.minor}",
            "SOFTWARE": f"farfieldsv {fsv.__version__}",
            "TYPE": kind.upper(),
        }
        kv.update({key.upper(): str(value) for key, value in items.items()})

        hdr = list()
        for key, value in kv.items():
            if not value.isnumeric():
                hdr.append(f"{key:8} = '{value}'")
            else:
                hdr.append(f"{key:8} = {value}")

        return hdr

    @staticmethod
    def message(text: Union[str, list[str]], space: int = 55) -> None:
        """
        A method to print terminal message.

        Parameters:
            text : string or list of strings.
                Text to be displayed.
            space : integer
                Number to indent the text.

        """
        line = (space + 2) * "="
        print(line)
        if isinstance(text, list):
            for t in text:
                print(t.center(space))
        else:
            print(text.center(space))
        print(line)
        print()


def default_rng(seed: Optional[int], offset: int = 0) -> np.random.Generator:
    """
    Seeded generator; stage offsets keep stages independent.

    """
    return np.random.default_rng(None if seed is None else seed + offset)
