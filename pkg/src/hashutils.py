"""
hashutils.py

Utility to hash configurations and telemetry files,
and save digests in sha256sum format
"""
####################
# Standard libraries
####################
import hashlib
import os

#################
# Local libraries
#################
from logutils import verbose_log


def hash_text(data: str) -> str:
    """sha256 hex digest of an utf-8 string"""
    return hashlib.sha256(data.encode("utf-8")).hexdigest()


def open_and_hash_file(**kwargs) -> str:
    """
    Read a file and return its sha256 hex digest

    Kwargs:
        :param path
            The path of file to be hashed
        :param verbose
            Apply verbose or not
    """
    __filename__ = kwargs.get("path")
    verbose = kwargs.get("verbose")

    try:
        with open(__filename__, "rb") as f_to_hash:
            __readable_hash__ = hashlib.sha256(f_to_hash.read()).hexdigest()

            if verbose:
                verbose_log(f"Hash of {__filename__}: {__readable_hash__}")

            return __readable_hash__
    except FileNotFoundError as exc:
        raise FileNotFoundError(f"Unable to read target file: {__filename__}") from exc


def save_hashed_file(**kwargs) -> str:
    """
    Appends '.sha256sum.txt' to `**kwargs<path>`
    and writes `<digest>  <basename>` into it, so
    `sha256sum -c` can check the file later

    Kwargs:
        :param data
            The digest of the file
        :param path
            The hashed file; the digest goes to <path>.sha256sum.txt
        :param verbose
            Apply verbose or not
    """
    __data__ = kwargs.get("data")
    __path__ = kwargs.get("path")
    verbose = kwargs.get("verbose")

    __hash_file__ = f"{__path__}.sha256sum.txt"

    if verbose:
        verbose_log(f"Saving a hash file: {__hash_file__}")

    try:
        with open(__hash_file__, mode="w", encoding="utf-8") as hash_file:
            hash_file.write(f"{__data__}  {os.path.basename(__path__)}\n")
    except OSError as exc:
        raise OSError(f"Unable to write hash file: {__hash_file__}") from exc

    return __hash_file__
