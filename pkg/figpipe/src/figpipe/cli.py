"""Command line wrapper: render one figure per invocation."""

import argparse
import sys

from .render import render
from .spec import load_spec


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="render-figure",
        description="Render a static figure from simulation CSV outputs")
    p.add_argument("--spec", required=True,
                   help="spec JSON path, bundled spec basename, or figure id")
    p.add_argument("--data", required=True,
                   help="directory holding the input CSV files")
    p.add_argument("--out", default=None,
                   help="output image path (default: the spec's output name)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = load_spec(args.spec)
        report = render(spec, args.data, args.out)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for grp, npts in report["series"].items():
        paths = report.get("paths", {}).get(grp)
        detail = f"{npts} points" if paths is None else \
            f"{paths} paths, {npts} points"
        print(f"series {grp}: {detail}")
    print(f"x range: [{report['x_range'][0]:.12g}, {report['x_range'][1]:.12g}] "
          f"({report['xscale']})")
    print(f"y range: [{report['y_range'][0]:.12g}, {report['y_range'][1]:.12g}] "
          f"({report['yscale']})")
    print(f"wrote {report['out']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
