"""FastAPI service exposing the spectrum computations.

Every endpoint takes the flat run-configuration as a JSON body (same keys as
the config file, energies as "10meV"/"2e-4au" strings) and returns plain
rows plus a summary, so the CLI and any other client can serialize results
identically.  The service is stateless; heavy runs simply hold the request
open.
"""

from __future__ import annotations

import math

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import runs
from .model import au_to_energy

app = FastAPI(
    title="hcpspectra",
    description=(
        "Energy- and angle-resolved ionization spectra of kicked Rydberg "
        "atoms: semiclassical trajectory sums with a quantum cross-check."
    ),
)


class RunRequest(BaseModel):
    """Flat run configuration; unknown fields are rejected."""

    n0: int = 50
    l0: int = 0
    m0: int = 0
    alpha: float = 0.0
    mode: str = "impulse"
    dp: float = 0.05
    tau_rel: float = 0.01
    exponent: int = 8
    shells: list[str] = Field(default_factory=lambda: ["10meV"])
    theta_min_deg: float = 1.0
    theta_max_deg: float = 179.0
    theta_count: int = 179
    outputs: list[str] = Field(default_factory=lambda: list(runs.DEFAULT_OUTPUTS))
    workers: int = 1
    grid_n: int = 400

    model_config = {"extra": "forbid"}

    def to_config(self) -> runs.RunConfig:
        try:
            return runs.RunConfig(
                n0=self.n0,
                l0=self.l0,
                m0=self.m0,
                alpha=self.alpha,
                mode=self.mode,
                dp=self.dp,
                tau_rel=self.tau_rel,
                exponent=self.exponent,
                shells=tuple(runs.parse_energy(s) for s in self.shells),
                theta_min_deg=self.theta_min_deg,
                theta_max_deg=self.theta_max_deg,
                theta_count=self.theta_count,
                outputs=tuple(self.outputs),
                workers=self.workers,
                grid_n=self.grid_n,
            )
        except runs.ConfigError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc


class ShellResult(BaseModel):
    eps_f: str
    columns: list[str]
    rows: list[list]
    summary: dict


class SpectrumResponse(BaseModel):
    shells: list[ShellResult]


class CurveResponse(BaseModel):
    eps_f: str
    columns: list[str]
    rows: list[list]


class ChecksResponse(BaseModel):
    checks: dict
    all_passed: bool


class ScaleRequest(BaseModel):
    config: RunRequest
    gamma: float


@app.get("/health")
def health():
    return {"status": "ok"}


@app.post("/spectrum", response_model=SpectrumResponse)
def spectrum(req: RunRequest):
    config = req.to_config()
    shells = []
    for eps_f in config.shells:
        try:
            rows, summary = runs.spectrum_rows(config, eps_f)
        except Exception as exc:  # numerical failure surfaces as 500 with detail
            raise HTTPException(status_code=500, detail=f"numerical failure: {exc}") from exc
        shells.append(
            ShellResult(
                eps_f=runs.format_energy(eps_f),
                columns=runs.SPECTRUM_COLUMNS,
                rows=rows,
                summary=summary,
            )
        )
    return SpectrumResponse(shells=shells)


@app.post("/shell-curve", response_model=list[CurveResponse])
def shell_curve(req: RunRequest):
    config = req.to_config()
    out = []
    for eps_f in config.shells:
        try:
            rows = runs.shell_curve_rows(config, eps_f)
        except Exception as exc:
            raise HTTPException(status_code=500, detail=f"numerical failure: {exc}") from exc
        out.append(
            CurveResponse(
                eps_f=runs.format_energy(eps_f), columns=runs.SHELL_CURVE_COLUMNS, rows=rows
            )
        )
    return out


@app.post("/catastrophes")
def catastrophes(req: RunRequest):
    config = req.to_config()
    out = {}
    from . import search as search_mod

    for eps_f in config.shells:
        try:
            curve = runs.build_curve(config, eps_f)
            report = search_mod.detect_catastrophes(curve)
        except Exception as exc:
            raise HTTPException(status_code=500, detail=f"numerical failure: {exc}") from exc
        out[runs.format_energy(eps_f)] = runs.catastrophe_summary(report)
    return out


@app.post("/oracle")
def oracle(req: RunRequest):
    config = req.to_config()
    if config.mode != "impulse" or config.n0 > 12:
        raise HTTPException(status_code=422, detail="oracle runs need impulse mode and n0 <= 12")
    from . import oracle as oracle_mod

    grid = config.theta_grid()
    out = []
    for eps_f in config.shells:
        dens = oracle_mod.oracle_spectrum(config.state, config.kick, eps_f, grid)
        out.append(
            {
                "eps_f": runs.format_energy(eps_f),
                "columns": ["theta_deg", "quantum_au"],
                "rows": [[math.degrees(float(t)), float(d)] for t, d in zip(grid, dens)],
            }
        )
    return out


@app.post("/checks", response_model=ChecksResponse)
def checks(req: RunRequest):
    config = req.to_config()
    result = runs.run_checks(config)
    return ChecksResponse(checks=result, all_passed=bool(result.get("all_passed")))


@app.post("/scale")
def scale(req: ScaleRequest):
    config = req.config.to_config()
    try:
        scaled = runs.scale_config(config, req.gamma)
    except (ValueError, runs.ConfigError) as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    return {
        "gamma": req.gamma,
        "config": runs.canonical_config(scaled),
        "config_text": runs.config_to_text(scaled),
        "chi": runs.scaled_strength(scaled.state, scaled.kick),
    }
