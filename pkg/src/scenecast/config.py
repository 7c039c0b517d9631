"""Run configuration: key = value files, hashing and named seed streams."""
from __future__ import annotations

import functools
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .errors import PipelineError
from .graph import SCENARIOS


def _range(text: str) -> tuple[int, int]:
    try:
        lo, hi = (int(p) for p in str(text).split(":"))
    except ValueError:
        raise PipelineError(f"expected a range like 2:15, got {text!r}") from None
    if lo > hi:
        raise PipelineError(f"empty range {text!r}")
    return lo, hi


def _list(text: str, sep: str = ",") -> list[str]:
    return [p.strip() for p in str(text).split(sep) if p.strip()]


@dataclass
class RunConfig:
    city: str = ""
    venues: str = ""
    reviews: str = ""
    users: str = ""
    census: str = ""
    codebook: str = ""
    centroids: str = ""
    out: str = "out"
    window: tuple[int, int] = (2011, 2018)
    test_years: list[int] = field(default_factory=lambda: [2016, 2017, 2018])
    reps: int = 25
    epochs: int = 10000
    seed: int = 0
    scenarios: list[str] = field(default_factory=lambda: list(SCENARIOS))
    models: list[str] = field(default_factory=lambda: ["gnn", "naive", "lasso", "forest", "boosted"])
    topics_range: tuple[int, int] = (1, 30)
    k_range: tuple[int, int] = (2, 15)
    gibbs_iters: int = 1000
    min_venues: int = 30
    hidden: int = 64
    dropout: float = 0.1
    lr: float = 1e-3

    # keys that do not change results and so stay out of the hash
    _UNHASHED = ("out",)
    _INPUTS = ("venues", "reviews", "users", "census", "codebook", "centroids")

    def set(self, key: str, value) -> None:
        key = key.replace("-", "_")
        names = {f.name: f for f in fields(self)}
        if key not in names:
            raise PipelineError(f"unknown config key {key!r}")
        if isinstance(value, str):
            value = self._parse(key, value)
        setattr(self, key, value)

    def _parse(self, key: str, text: str):
        if key in ("window", "topics_range", "k_range"):
            return _range(text)
        if key == "test_years":
            return [int(y) for y in _list(text)]
        if key == "scenarios":
            return _list(text, ";")
        if key == "models":
            return _list(text)
        current = getattr(self, key)
        try:
            if isinstance(current, int):
                return int(text)
            if isinstance(current, float):
                return float(text)
        except ValueError:
            raise PipelineError(f"config key {key!r}: cannot parse {text!r}") from None
        return text

    def to_dict(self) -> dict:
        d = asdict(self)
        d["window"] = list(self.window)
        d["topics_range"] = list(self.topics_range)
        d["k_range"] = list(self.k_range)
        return d

    def hash(self) -> str:
        d = {k: v for k, v in self.to_dict().items() if k not in self._UNHASHED}
        # inputs are identified by content so copies of a run hash alike
        for k in self._INPUTS:
            if d[k] and Path(d[k]).is_file():
                d[k] = _file_digest(str(Path(d[k]).resolve()), Path(d[k]).stat().st_mtime_ns)
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:12]

    def validate(self, require_inputs: bool = True) -> None:
        if require_inputs:
            for key in ("venues", "reviews", "users", "census", "codebook"):
                path = getattr(self, key)
                if not path:
                    raise PipelineError(f"config key {key!r} is not set")
                if not Path(path).exists():
                    raise PipelineError(f"{key} file not found: {path}")
            if self.centroids and not Path(self.centroids).exists():
                raise PipelineError(f"centroids file not found: {self.centroids}")
        lo, hi = self.window
        bad = [y for y in self.test_years if not lo < y <= hi]
        if bad:
            raise PipelineError(f"test years {bad} must lie inside the window {lo}-{hi} after its first year")
        if self.reps < 1 or self.epochs < 0:
            raise PipelineError("reps must be >= 1 and epochs >= 0")
        unknown = [s for s in self.scenarios if s not in SCENARIOS]
        if unknown:
            raise PipelineError(f"unknown scenarios {unknown}")
        bad_models = [m for m in self.models if m not in ("gnn", "naive", "lasso", "forest", "boosted")]
        if bad_models:
            raise PipelineError(f"unknown models {bad_models}")


@functools.lru_cache(maxsize=32)
def _file_digest(path: str, mtime_ns: int) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return "sha256:" + h.hexdigest()


def read_config(path: str | Path, config: RunConfig | None = None) -> RunConfig:
    """Parse ``key = value`` lines (``#`` starts a comment); relative paths resolve against the file."""
    config = config or RunConfig()
    base = Path(path).parent
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise PipelineError(f"{path}:{lineno}: expected key = value")
        key, value = (p.strip() for p in line.split("=", 1))
        if key in ("venues", "reviews", "users", "census", "codebook", "centroids", "out") and value:
            value = str(base / value) if not Path(value).is_absolute() else value
        config.set(key, value)
    return config


def write_config(config: RunConfig, path: str | Path, relative_to: str | Path | None = None) -> None:
    lines = []
    for k, v in config.to_dict().items():
        if isinstance(v, list) and k in ("window", "topics_range", "k_range"):
            v = f"{v[0]}:{v[1]}"
        elif k == "scenarios":
            v = ";".join(v)
        elif isinstance(v, list):
            v = ",".join(str(x) for x in v)
        elif relative_to is not None and k in ("venues", "reviews", "users", "census", "codebook", "centroids", "out") and v:
            try:
                v = str(Path(v).resolve().relative_to(Path(relative_to).resolve()))
            except ValueError:
                pass
        lines.append(f"{k} = {v}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def derive_seed(base: int, *stream: object) -> int:
    """Deterministic 63-bit seed for a named stream, e.g. ``derive_seed(7, "gnn", city, year, rep)``."""
    key = json.dumps([int(base), *[str(s) for s in stream]])
    return int.from_bytes(hashlib.sha256(key.encode()).digest()[:8], "big") >> 1
