import logging
import sys
from logging import getLogger, StreamHandler
from pathlib import Path
from time import strftime
from typing import Any


def write_text(path: Path, text: str, encoding='utf8'):
    with path.open(mode='w', encoding=encoding) as f:
        f.write(text)


def read_text(path: Path, encoding='utf8') -> str:
    with path.open(encoding=encoding) as f:
        return f.read()


def mkdir(directory: Path) -> None:
    directory.mkdir(parents=True, exist_ok=True)


def home_directory() -> Path:
    return Path.home()


def timestamp() -> str:
    return strftime("%Y%m%d-%H%M%S")


logger = getLogger("results")
logger.setLevel(logging.INFO)

handler = StreamHandler(sys.stdout)
handler.setLevel(logging.INFO)
logger.addHandler(handler)


def log(obj: Any):
    logger.info(str(obj))
