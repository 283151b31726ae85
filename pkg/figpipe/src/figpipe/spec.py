"""Figure specs: what to read, how to map columns onto axes.

A spec is a small JSON object; the renderer is a pure function of
(spec, input files). Bundled specs live in figpipe/specs, one per figure id.
"""

import dataclasses
import json
import os

SPEC_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "specs")

_SCALES = ("linear", "log")


@dataclasses.dataclass(frozen=True)
class FigureSpec:
    """Declarative description of one figure.

    inputs are CSV filenames resolved against the --data directory. x/y name
    the plotted columns, group splits rows into series, and path (optional)
    splits a series into individual per-seed lines. error_bar names the
    half-length column for vertical error bars; filter keeps only rows whose
    named columns equal the given values. overlay currently supports
    "least_squares" (fit line over all plotted points; slope and R^2 are
    printed and reported).
    """

    figure_id: str
    inputs: tuple
    x: str
    y: str
    group: str
    output: str
    path: str | None = None
    error_bar: str | None = None
    filter: dict = dataclasses.field(default_factory=dict)
    scale: dict = dataclasses.field(default_factory=lambda: {"x": "linear", "y": "linear"})
    overlay: str | None = None
    x_label: str | None = None
    y_label: str | None = None
    title: str | None = None

    def __post_init__(self):
        if not self.figure_id:
            raise ValueError("spec needs a figure_id")
        if not self.inputs:
            raise ValueError(f"spec {self.figure_id!r} lists no inputs")
        for axis in ("x", "y"):
            s = self.scale.get(axis, "linear")
            if s not in _SCALES:
                raise ValueError(
                    f"spec {self.figure_id!r}: scale.{axis} must be one of "
                    f"{_SCALES}, got {s!r}")
        if self.overlay not in (None, "least_squares"):
            raise ValueError(
                f"spec {self.figure_id!r}: unknown overlay {self.overlay!r}")

    def columns(self) -> list:
        """Every input column the spec references."""
        cols = [self.x, self.y, self.group]
        if self.path:
            cols.append(self.path)
        if self.error_bar:
            cols.append(self.error_bar)
        cols.extend(self.filter)
        return cols

    @staticmethod
    def from_config(cfg: dict) -> "FigureSpec":
        known = {f.name for f in dataclasses.fields(FigureSpec)}
        extra = set(cfg) - known
        if extra:
            raise ValueError(f"unknown spec keys: {sorted(extra)}")
        cfg = dict(cfg)
        cfg["inputs"] = tuple(cfg.get("inputs", ()))
        return FigureSpec(**cfg)


def bundled_spec_ids() -> list:
    ids = []
    for fn in sorted(os.listdir(SPEC_DIR)):
        if fn.endswith(".spec.json"):
            ids.append(fn[: -len(".spec.json")])
    return ids


def load_spec(path_or_id: str) -> FigureSpec:
    """Load a spec from a path, falling back to the bundled spec directory.

    Accepts a filesystem path, a bundled basename like "fig3.spec.json", or a
    bare figure id like "fig3".
    """
    candidates = [path_or_id]
    base = os.path.basename(path_or_id)
    if not base.endswith(".json"):
        base += ".spec.json"
    candidates.append(os.path.join(SPEC_DIR, base))
    for cand in candidates:
        if os.path.isfile(cand):
            with open(cand) as fh:
                try:
                    cfg = json.load(fh)
                except json.JSONDecodeError as exc:
                    raise ValueError(f"{cand}: invalid JSON: {exc}") from exc
            return FigureSpec.from_config(cfg)
    raise ValueError(
        f"no spec at {path_or_id!r} and no bundled spec named {base!r}; "
        f"bundled ids: {', '.join(bundled_spec_ids())}")
