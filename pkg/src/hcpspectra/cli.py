"""Command-line front end: a thin client over the service layer.

Subcommands mirror the service endpoints (spectrum, shell-curve,
catastrophes, oracle, checks, scale, serve).  By default requests execute
in-process through the same handlers the HTTP service uses; pass
``--server http://host:port`` to send them to a running instance instead.
The CLI owns all file output so CSV/JSON bytes are identical either way.

Exit codes: 0 ok, 1 check failure, 2 config error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

from . import runs
from .model import au_to_energy

EXIT_OK = 0
EXIT_CHECK_FAILURE = 1
EXIT_CONFIG_ERROR = 2
EXIT_NUMERICAL = 3


def _fmt(value) -> str:
    """Locale-independent 17-significant-digit numeric formatting."""
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def write_csv(path: Path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_json(path: Path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


class LocalClient:
    """In-process execution through the service-layer handlers."""

    def spectrum(self, config: runs.RunConfig):
        out = []
        for eps_f in config.shells:
            rows, summary = runs.spectrum_rows(config, eps_f)
            out.append((eps_f, rows, summary))
        return out

    def shell_curve(self, config: runs.RunConfig):
        return [(eps_f, runs.shell_curve_rows(config, eps_f)) for eps_f in config.shells]

    def catastrophes(self, config: runs.RunConfig):
        from . import search as search_mod

        out = {}
        for eps_f in config.shells:
            curve = runs.build_curve(config, eps_f)
            out[runs.format_energy(eps_f)] = runs.catastrophe_summary(
                search_mod.detect_catastrophes(curve)
            )
        return out

    def oracle(self, config: runs.RunConfig):
        from . import oracle as oracle_mod

        grid = config.theta_grid()
        out = []
        for eps_f in config.shells:
            dens = oracle_mod.oracle_spectrum(config.state, config.kick, eps_f, grid)
            rows = [[math.degrees(float(t)), float(d)] for t, d in zip(grid, dens)]
            out.append((eps_f, rows))
        return out

    def checks(self, config: runs.RunConfig):
        return runs.run_checks(config)

    def scale(self, config: runs.RunConfig, gamma: float):
        scaled = runs.scale_config(config, gamma)
        return {
            "gamma": gamma,
            "config": runs.canonical_config(scaled),
            "config_text": runs.config_to_text(scaled),
        }


class HttpClient:
    """Talk to a running service instance."""

    def __init__(self, base_url: str):
        import httpx

        self._client = httpx.Client(base_url=base_url, timeout=None)

    def _request_body(self, config: runs.RunConfig) -> dict:
        body = runs.canonical_config(config)
        body.pop("out_dir", None)
        return body

    def spectrum(self, config):
        resp = self._client.post("/spectrum", json=self._request_body(config))
        resp.raise_for_status()
        out = []
        for shell in resp.json()["shells"]:
            out.append((runs.parse_energy(shell["eps_f"]), shell["rows"], shell["summary"]))
        return out

    def shell_curve(self, config):
        resp = self._client.post("/shell-curve", json=self._request_body(config))
        resp.raise_for_status()
        return [(runs.parse_energy(s["eps_f"]), s["rows"]) for s in resp.json()]

    def catastrophes(self, config):
        resp = self._client.post("/catastrophes", json=self._request_body(config))
        resp.raise_for_status()
        return resp.json()

    def oracle(self, config):
        resp = self._client.post("/oracle", json=self._request_body(config))
        resp.raise_for_status()
        return [(runs.parse_energy(s["eps_f"]), s["rows"]) for s in resp.json()]

    def checks(self, config):
        resp = self._client.post("/checks", json=self._request_body(config))
        resp.raise_for_status()
        return resp.json()["checks"]

    def scale(self, config, gamma):
        resp = self._client.post(
            "/scale", json={"config": self._request_body(config), "gamma": gamma}
        )
        resp.raise_for_status()
        return resp.json()


def _shell_tag(eps_f: float) -> str:
    mev = au_to_energy(eps_f)
    return f"{mev:g}meV".replace(".", "p")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hcpspectra",
        description="Ionization spectra of kicked Rydberg atoms (semiclassical + quantum).",
    )
    parser.add_argument("--config", type=Path, help="flat key = value config file")
    parser.add_argument("--server", help="base URL of a running service (default: in-process)")
    parser.add_argument("--out-dir", type=Path, help="output directory (overrides config)")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="config override, repeatable")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("spectrum", help="angle-resolved spectra, one CSV per shell")
    sub.add_parser("shell-curve", help="launch-locus CSV per shell")
    sub.add_parser("catastrophes", help="rainbow/glory report as JSON")
    sub.add_parser("oracle", help="quantum partial-wave spectrum CSV per shell")
    sub.add_parser("checks", help="invariant suite, JSON report")
    p_scale = sub.add_parser("scale", help="apply the classical scaling map to a config")
    p_scale.add_argument("--gamma", type=float, required=True)
    p_serve = sub.add_parser("serve", help="run the HTTP service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    return parser


def load_config(args) -> runs.RunConfig:
    text = args.config.read_text() if args.config else ""
    overrides: dict = {}
    for item in args.set:
        if "=" not in item:
            raise runs.ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, val = item.split("=", 1)
        overrides[key.strip()] = val.strip()
    if args.out_dir is not None:
        overrides["out_dir"] = str(args.out_dir)
    return runs.parse_config(text, overrides)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "serve":
        import uvicorn

        from .service import app

        uvicorn.run(app, host=args.host, port=args.port)
        return EXIT_OK

    try:
        config = load_config(args)
    except runs.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR

    client = HttpClient(args.server) if args.server else LocalClient()
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    try:
        if args.command == "spectrum":
            for eps_f, rows, summary in client.spectrum(config):
                tag = _shell_tag(eps_f)
                write_csv(out_dir / f"spectrum_{tag}.csv", runs.SPECTRUM_COLUMNS, rows)
                write_json(out_dir / f"spectrum_{tag}.json", summary)
                print(f"wrote spectrum_{tag}.csv ({len(rows)} rows)")
        elif args.command == "shell-curve":
            for eps_f, rows in client.shell_curve(config):
                tag = _shell_tag(eps_f)
                write_csv(out_dir / f"shell_curve_{tag}.csv", runs.SHELL_CURVE_COLUMNS, rows)
                print(f"wrote shell_curve_{tag}.csv ({len(rows)} rows)")
        elif args.command == "catastrophes":
            report = client.catastrophes(config)
            write_json(out_dir / "catastrophes.json", report)
            print(json.dumps(report, indent=2, sort_keys=True))
        elif args.command == "oracle":
            for eps_f, rows in client.oracle(config):
                tag = _shell_tag(eps_f)
                write_csv(out_dir / f"oracle_{tag}.csv", ["theta_deg", "quantum_au"], rows)
                print(f"wrote oracle_{tag}.csv ({len(rows)} rows)")
        elif args.command == "checks":
            checks = client.checks(config)
            write_json(out_dir / "checks.json", checks)
            print(json.dumps(checks, indent=2, sort_keys=True))
            if not checks.get("all_passed"):
                return EXIT_CHECK_FAILURE
        elif args.command == "scale":
            result = client.scale(config, args.gamma)
            print(result["config_text"], end="")
    except runs.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except Exception as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
