"""Adapter configuration and class-list parsing.

The class file is one name per line; blank lines are skipped. Label id =
line index, and 255 is reserved for pixels the backend assigns to none
of the listed classes, so at most 255 classes are allowed.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .errors import AdapterError

MAX_CLASSES = 255
IGNORE_LABEL = 255


def load_classes(path: str | Path) -> tuple:
    """Read an ordered class vocabulary from a text file."""
    path = Path(path)
    if not path.is_file():
        raise AdapterError(f"class file not found: {path}")
    names = tuple(line.strip() for line in path.read_text().splitlines()
                  if line.strip())
    return names


@dataclass(frozen=True)
class AdapterConfig:
    """One batch prediction job: which backend, which classes, which files."""

    model: str
    class_names: tuple
    input_dir: Path
    output_dir: Path
    device: str = "cpu"
    prompt_template: str = "{name}"

    def __post_init__(self):
        names = tuple(str(n) for n in self.class_names)
        if not names:
            raise AdapterError("class list is empty")
        if len(names) > MAX_CLASSES:
            raise AdapterError(
                f"at most {MAX_CLASSES} classes are supported, got {len(names)}")
        if len(set(names)) != len(names):
            raise AdapterError("class names must be unique")
        if "{name}" not in self.prompt_template:
            raise AdapterError(
                f"prompt template must contain '{{name}}', got {self.prompt_template!r}")
        object.__setattr__(self, "class_names", names)
        object.__setattr__(self, "input_dir", Path(self.input_dir))
        object.__setattr__(self, "output_dir", Path(self.output_dir))

    def prompts(self) -> tuple:
        """Class names rendered through the prompt template, in label order."""
        return tuple(self.prompt_template.format(name=n) for n in self.class_names)
