"""Command-line runner: config parsing, pipelines, deterministic output.

A run is described by a single JSON document (see the README for the
schema); a handful of flags override its fields.  Identical configuration
and build produce byte-identical artifacts: fixed column order, floats in
shortest round-trip decimal at the configured precision, and the sentinel
``NA`` for undefined ratio samples.

Exit codes: 0 success, 1 configuration error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dynamics import ProbabilityTrace, TimeGrid, compute_trace
from .errors import ConfigError, DeltaboxError, FittingError, NumericalError
from .fitting import FitResult, FitWindow, fit_trace, sweep_beta
from .oracle import compare_with_spectral
from .overlaps import build_overlap_set
from .spectral import BarrierConfig, solve_spectrum

__all__ = ["RunConfig", "run", "main"]

COMMANDS = ("spectrum", "evolve", "fit", "sweep", "oracle-compare", "report")

TRACE_HEADER = "t,P0,PL,PR,j0,jL,jR,Pi,pi,GammaT,W"

# Per-row conservation gate for emitted traces: P0 + PL + PR must match the
# truncated-state norm (the conserved quantity) to this tolerance.  The gap
# between that norm and 1 is the basis completeness defect, reported in the
# run metadata; it is a property of the truncation, not a numerical failure.
SUM_RULE_TOL = 1e-6

PRESETS = {
    "desk": {"box_half_length": 200.0, "n_modes": 1500},
    "paper": {"box_half_length": 400.0, "n_modes": 3000},
}

_MODEL_DEFAULTS = {
    "v0": 10.0,
    "kappa": 0.4,
    "box_half_length": 200.0,
    "n_modes": 1500,
    "scan_points_per_mode": 64,
}

_GRID_DEFAULTS = {"t_start": 0.0, "t_end": 120.0, "n_samples": 2401}

_ORACLE_DEFAULTS = {
    "dx": 0.005,
    "dt": None,
    "t_end": 20.0,
    "n_samples": 201,
    "richardson": True,
}


@dataclass
class RunConfig:
    """Fully resolved run description."""

    model: BarrierConfig
    grid: TimeGrid
    command: str
    output: Path
    fmt: str = "csv"
    precision: int = 12
    fit_window: FitWindow | None = None
    sweep_kappa: list[float] = field(default_factory=list)
    sweep_v0: list[float] = field(default_factory=list)
    oracle: dict = field(default_factory=dict)
    threads: int = 1


def _merge(defaults: dict, overrides: dict | None, context: str) -> dict:
    merged = dict(defaults)
    for key, value in (overrides or {}).items():
        if key not in defaults:
            raise ConfigError(f"unknown key {key!r} in {context!r} section")
        merged[key] = value
    return merged


def parse_config(document: dict, args: argparse.Namespace) -> RunConfig:
    """Resolve the JSON document plus flag overrides into a RunConfig."""
    if not isinstance(document, dict):
        raise ConfigError("config root must be a JSON object")

    model_defaults = dict(_MODEL_DEFAULTS)
    preset = args.preset or document.get("preset")
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose desk or paper")
        model_defaults.update(PRESETS[preset])
    model_doc = _merge(model_defaults, document.get("model"), "model")
    try:
        model = BarrierConfig(**model_doc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid model section: {exc}") from exc

    grid_doc = _merge(_GRID_DEFAULTS, document.get("grid"), "grid")
    try:
        grid = TimeGrid(**grid_doc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid grid section: {exc}") from exc

    command = args.command or document.get("command")
    if command not in COMMANDS:
        raise ConfigError(f"command must be one of {COMMANDS}, got {command!r}")

    output = args.out or document.get("output")
    if not output:
        raise ConfigError("no output path given (config 'output' or --out)")

    fmt = args.format or document.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise ConfigError(f"format must be csv or json, got {fmt!r}")

    precision = int(document.get("precision", 12))
    if not 1 <= precision <= 17:
        raise ConfigError(f"precision must be in [1, 17], got {precision}")

    fit_window = None
    fit_doc = document.get("fit")
    if fit_doc and fit_doc.get("mode", "auto") == "manual":
        try:
            fit_window = FitWindow(
                t_lo=float(fit_doc["t_lo"]),
                t_hi=float(fit_doc["t_hi"]),
                selection_mode="manual",
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid manual fit window: {exc}") from exc

    sweep_doc = document.get("sweep") or {}
    oracle_doc = _merge(_ORACLE_DEFAULTS, document.get("oracle"), "oracle")

    return RunConfig(
        model=model,
        grid=grid,
        command=command,
        output=Path(output),
        fmt=fmt,
        precision=precision,
        fit_window=fit_window,
        sweep_kappa=[float(k) for k in sweep_doc.get("kappa", [])],
        sweep_v0=[float(v) for v in sweep_doc.get("v0", [])],
        oracle=oracle_doc,
        threads=args.threads if args.threads is not None else int(document.get("threads", 1)),
    )


def _fmt_float(value: float, precision: int) -> str:
    if np.isnan(value):
        return "NA"
    return format(value + 0.0, f".{precision}g")  # +0.0 folds -0.0 into 0


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _write_json(path: Path, payload: dict) -> None:
    _write_text(path, json.dumps(payload, indent=2, sort_keys=False) + "\n")


def _check_trace_conservation(trace: ProbabilityTrace) -> None:
    worst = float(np.max(np.abs(trace.conservation_residual)))
    if worst > SUM_RULE_TOL:
        raise NumericalError(
            f"trace conservation residual {worst:.3e} exceeds {SUM_RULE_TOL:.0e}; "
            "probabilities are inconsistent with the truncated-state norm"
        )


def _trace_columns(trace: ProbabilityTrace) -> list[tuple[str, np.ndarray]]:
    return [
        ("t", trace.t),
        ("P0", trace.p0_surv),
        ("PL", trace.p_left),
        ("PR", trace.p_right),
        ("j0", trace.j0),
        ("jL", trace.j_left),
        ("jR", trace.j_right),
        ("Pi", trace.ratio_prob),
        ("pi", trace.ratio_curr),
        ("GammaT", trace.gamma_running),
        ("W", trace.wronskian),
    ]


def _trace_csv(trace: ProbabilityTrace, precision: int) -> str:
    columns = _trace_columns(trace)
    lines = [TRACE_HEADER]
    for i in range(len(trace)):
        lines.append(",".join(_fmt_float(col[i], precision) for _, col in columns))
    return "\n".join(lines) + "\n"


def _trace_meta(cfg: RunConfig, trace: ProbabilityTrace) -> dict:
    return {
        "model": {
            "v0": cfg.model.v0,
            "kappa": cfg.model.kappa,
            "box_half_length": cfg.model.box_half_length,
            "n_modes": cfg.model.n_modes,
            "scan_points_per_mode": cfg.model.scan_points_per_mode,
        },
        "horizon": trace.horizon,
        "uv_return_time": trace.uv_return_time,
        "alpha_norm": trace.alpha_norm,
        "completeness_defect": 1.0 - trace.alpha_norm,
    }


def _trace_json(cfg: RunConfig, trace: ProbabilityTrace) -> dict:
    data = {
        name: [None if np.isnan(v) else v for v in col.tolist()]
        for name, col in _trace_columns(trace)
    }
    return {"meta": _trace_meta(cfg, trace), "data": data}


def _build_trace(cfg: RunConfig) -> ProbabilityTrace:
    spectrum = solve_spectrum(cfg.model)
    overlaps = build_overlap_set(spectrum)
    trace = compute_trace(overlaps, cfg.grid)
    _check_trace_conservation(trace)
    return trace


def _cmd_spectrum(cfg: RunConfig) -> None:
    spectrum = solve_spectrum(cfg.model)
    from .overlaps import alpha_coeffs

    alpha = alpha_coeffs(spectrum)
    momenta = spectrum.momenta
    if cfg.fmt == "csv":
        lines = ["i,p,alpha"]
        for i in range(len(spectrum)):
            lines.append(
                f"{i + 1},{_fmt_float(momenta[i], cfg.precision)},"
                f"{_fmt_float(alpha[i], cfg.precision)}"
            )
        _write_text(cfg.output, "\n".join(lines) + "\n")
    else:
        _write_json(
            cfg.output,
            {
                "i": list(range(1, len(spectrum) + 1)),
                "p": momenta.tolist(),
                "alpha": alpha.tolist(),
            },
        )


def _cmd_evolve(cfg: RunConfig) -> None:
    trace = _build_trace(cfg)
    if cfg.fmt == "csv":
        _write_text(cfg.output, _trace_csv(trace, cfg.precision))
    else:
        _write_json(cfg.output, _trace_json(cfg, trace))


def _fit_payload(fit: FitResult) -> dict:
    return fit.as_dict()


def _cmd_fit(cfg: RunConfig) -> None:
    trace = _build_trace(cfg)
    fit = fit_trace(trace, cfg.fit_window)
    if cfg.fmt == "json":
        _write_json(cfg.output, _fit_payload(fit))
    else:
        header = "gamma,t0,gamma_left,gamma_right,beta,residual_rms,t_lo,t_hi,selection_mode"
        values = [
            fit.gamma, fit.t0, fit.gamma_left, fit.gamma_right, fit.beta,
            fit.residual_rms, fit.window.t_lo, fit.window.t_hi,
        ]
        row = ",".join(_fmt_float(v, cfg.precision) for v in values)
        _write_text(cfg.output, f"{header}\n{row},{fit.window.selection_mode}\n")


def _cmd_sweep(cfg: RunConfig) -> list:
    if not cfg.sweep_kappa or not cfg.sweep_v0:
        raise ConfigError("sweep command needs non-empty sweep.kappa and sweep.v0")
    rows = sweep_beta(
        cfg.sweep_kappa, cfg.sweep_v0, cfg.model, grid=cfg.grid, threads=cfg.threads
    )
    if cfg.fmt == "csv":
        lines = ["v0,kappa,beta,gamma,residual_rms,status"]
        for r in rows:
            lines.append(
                ",".join(
                    [
                        _fmt_float(r.v0, cfg.precision),
                        _fmt_float(r.kappa, cfg.precision),
                        _fmt_float(r.beta, cfg.precision),
                        _fmt_float(r.gamma, cfg.precision),
                        _fmt_float(r.residual_rms, cfg.precision),
                        r.status.split(":")[0],
                    ]
                )
            )
        _write_text(cfg.output, "\n".join(lines) + "\n")
    else:
        _write_json(
            cfg.output,
            {
                "rows": [
                    {
                        "v0": r.v0,
                        "kappa": r.kappa,
                        "beta": None if np.isnan(r.beta) else r.beta,
                        "gamma": None if np.isnan(r.gamma) else r.gamma,
                        "residual_rms": None
                        if np.isnan(r.residual_rms)
                        else r.residual_rms,
                        "status": r.status,
                    }
                    for r in rows
                ]
            },
        )
    return rows


def _cmd_oracle_compare(cfg: RunConfig) -> None:
    o = cfg.oracle
    report = compare_with_spectral(
        cfg.model,
        t_end=float(o["t_end"]),
        n_samples=int(o["n_samples"]),
        dx=float(o["dx"]),
        dt=None if o["dt"] is None else float(o["dt"]),
        richardson=bool(o["richardson"]),
    )
    if cfg.fmt == "csv":
        lines = ["key,value"]
        flat = {}

        def flatten(prefix: str, obj) -> None:
            if isinstance(obj, dict):
                for k, v in obj.items():
                    flatten(f"{prefix}.{k}" if prefix else str(k), v)
            else:
                flat[prefix] = obj

        flatten("", report)
        for key in flat:
            value = flat[key]
            if isinstance(value, float):
                value = _fmt_float(value, cfg.precision)
            lines.append(f"{key},{value}")
        _write_text(cfg.output, "\n".join(lines) + "\n")
    else:
        _write_json(cfg.output, report)


def _cmd_report(cfg: RunConfig) -> None:
    from . import report as figures

    trace = _build_trace(cfg)
    try:
        fit = fit_trace(trace, cfg.fit_window)
    except FittingError as exc:
        print(f"deltabox: fit skipped in report: {exc}", file=sys.stderr)
        fit = None
    stem = cfg.output.with_suffix("") if cfg.output.suffix else cfg.output
    stem.parent.mkdir(parents=True, exist_ok=True)
    _write_text(stem.with_suffix(".csv"), _trace_csv(trace, cfg.precision))
    payload = _trace_meta(cfg, trace)
    if fit is not None:
        payload["fit"] = _fit_payload(fit)
    _write_json(stem.with_name(stem.name + "_fit.json"), payload)
    figures.render_survival_figure(
        trace, fit, stem.with_name(stem.name + "_survival.png")
    )
    figures.render_partials_figure(
        trace, fit, stem.with_name(stem.name + "_partials.png")
    )
    figures.render_ratios_figure(trace, fit, stem.with_name(stem.name + "_ratios.png"))
    if cfg.sweep_kappa and cfg.sweep_v0:
        rows = sweep_beta(
            cfg.sweep_kappa, cfg.sweep_v0, cfg.model, grid=cfg.grid,
            threads=cfg.threads,
        )
        figures.render_sweep_figure(rows, stem.with_name(stem.name + "_beta.png"))


def run(cfg: RunConfig) -> int:
    """Execute one resolved configuration; returns the process exit code."""
    dispatch = {
        "spectrum": _cmd_spectrum,
        "evolve": _cmd_evolve,
        "fit": _cmd_fit,
        "sweep": _cmd_sweep,
        "oracle-compare": _cmd_oracle_compare,
        "report": _cmd_report,
    }
    try:
        dispatch[cfg.command](cfg)
    except ConfigError as exc:
        print(f"deltabox: configuration error: {exc}", file=sys.stderr)
        return 1
    except (NumericalError, FittingError) as exc:
        print(f"deltabox: numerical failure: {exc}", file=sys.stderr)
        return 2
    except DeltaboxError as exc:
        print(f"deltabox: {exc}", file=sys.stderr)
        return 2
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="deltabox",
        description="Spectral simulator for decay through two unequal delta barriers",
    )
    parser.add_argument("--config", help="path to the JSON run configuration")
    parser.add_argument("--command", choices=COMMANDS, help="override config command")
    parser.add_argument("--out", help="override output path")
    parser.add_argument("--format", choices=("csv", "json"), help="override format")
    parser.add_argument("--threads", type=int, help="sweep parallelism")
    parser.add_argument("--preset", choices=tuple(PRESETS), help="model size preset")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    document: dict = {}
    if args.config:
        try:
            document = json.loads(Path(args.config).read_text())
        except OSError as exc:
            print(f"deltabox: cannot read config: {exc}", file=sys.stderr)
            return 1
        except json.JSONDecodeError as exc:
            print(f"deltabox: malformed config JSON: {exc}", file=sys.stderr)
            return 1
    try:
        cfg = parse_config(document, args)
    except ConfigError as exc:
        print(f"deltabox: configuration error: {exc}", file=sys.stderr)
        return 1
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
