"""
Flat key=value text files.

Used for the command-line config file and for every manifest the toolkit
writes. Lines starting with '#' and blank lines are ignored.
"""

from pathlib import Path

from straightkit.utils.errors import ConfigError


def parse_key_values(text, source="<text>"):
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key '{key}'")
        values[key] = value.strip()
    return values


def read_key_values(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e
    return parse_key_values(text, source=str(path))


def format_value(value):
    if isinstance(value, (list, tuple)):
        return ",".join(format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_key_values(path, values, header=None):
    lines = []
    if header:
        lines.extend(f"# {line}" for line in header.splitlines())
    for key, value in values.items():
        lines.append(f"{key}={format_value(value)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
