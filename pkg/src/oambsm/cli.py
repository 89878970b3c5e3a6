"""Command-line entry point: ``oambsm {verify,coincidence,search,superdense,capacity,calibrate}``.

Exit codes: 0 success, 1 usage error, 2 verification failure, 3 non-convergence.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import channel, elements, measurement, search
from .bell import DEFAULT_CODEBOOK, LABELS, BellLabel, SourceSpectrum, hyper_bell, validate_codebook
from .reference import TARGET_BASIS, expansion_matrix
from .states import INITIAL_BASIS, NotUnitaryError, StateError, decompose, unitarity_residual

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXIT_OK, EXIT_USAGE, EXIT_VERIFY, EXIT_CONVERGE = 0, 1, 2, 3
SIG_DIGITS = 12


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _round(obj: Any) -> Any:
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if not math.isfinite(x) else float(f"{x:.{SIG_DIGITS}g}")
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _round(obj.tolist())
    if isinstance(obj, dict):
        return {str(k): _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    return obj


def _dump(obj: Any, out: str | None = None) -> None:
    text = json.dumps(_round(obj), indent=2, allow_nan=True)
    if out:
        Path(out).write_text(text + "\n")
    print(text)


def _complex_rows(mat: np.ndarray) -> list:
    return [[[z.real, z.imag] for z in row] for row in np.asarray(mat, dtype=complex)]


def load_config_file(path: str | Path) -> dict:
    path = Path(path)
    if not path.exists():
        raise UsageError(f"config file not found: {path}")
    if path.suffix == ".toml":
        return tomllib.loads(path.read_text())
    if path.suffix == ".json":
        return json.loads(path.read_text())
    raise UsageError(f"config must be .json or .toml, got {path.name}")


@dataclass
class RunConfig:
    subspace_m: int = 1
    codebook: dict[str, BellLabel] = field(default_factory=lambda: dict(DEFAULT_CODEBOOK))
    source: SourceSpectrum = field(default_factory=SourceSpectrum)
    eps: float = 0.0
    seed: int | None = None
    eps_fire: float = measurement.FIRE_EPS
    tol: float = 1e-9
    u4: np.ndarray | None = None

    @classmethod
    def from_sources(cls, path: str | None, **overrides) -> "RunConfig":
        raw = load_config_file(path) if path else {}
        cfg = cls()
        try:
            if "subspace_m" in raw:
                cfg.subspace_m = int(raw["subspace_m"])
            if "codebook" in raw:
                cfg.codebook = validate_codebook(raw["codebook"])
            if "source" in raw:
                cfg.source = SourceSpectrum.from_config(raw["source"]["weights"])
            for key in ("eps", "eps_fire", "tol"):
                if key in raw:
                    setattr(cfg, key, float(raw[key]))
            if "seed" in raw:
                cfg.seed = int(raw["seed"])
            if "u4" in raw:
                arr = np.array(raw["u4"], dtype=float)
                cfg.u4 = arr[..., 0] + 1j * arr[..., 1] if arr.ndim == 3 else arr.astype(complex)
        except (KeyError, TypeError, ValueError, StateError) as exc:
            raise UsageError(f"bad config: {exc}") from exc
        for key, val in overrides.items():
            if val is not None:
                setattr(cfg, key, val)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.subspace_m < 1:
            raise UsageError("subspace_m must be >= 1")
        if not 0.0 <= self.eps <= 1.0:
            raise UsageError("eps must lie in [0, 1]")
        if self.eps_fire <= 0 or self.tol <= 0:
            raise UsageError("thresholds must be positive")
        if self.u4 is not None and np.shape(self.u4) != (4, 4):
            raise UsageError("u4 must be a 4x4 matrix")


def _check(passed: bool, residual: float, **extra) -> dict:
    return {"passed": bool(passed), "max_residual": float(residual), **extra}


def cmd_verify(cfg: RunConfig) -> tuple[int, dict]:
    m = cfg.subspace_m
    u = search.REFERENCE_U4.matrix if cfg.u4 is None else np.asarray(cfg.u4, dtype=complex)
    checks: dict[str, dict] = {}

    resid = unitarity_residual(u)
    checks["unitarity"] = _check(resid < 1e-10, resid)

    unitary = checks["unitarity"]["passed"]
    rows = np.array([v.amplitudes for v in search.target_basis(u)]) if unitary else u
    resid = float(np.max(np.abs(rows - TARGET_BASIS)))
    checks["target_basis"] = _check(resid < 1e-12, resid)

    worst = math.inf
    if unitary:
        worst = max(float(np.max(np.abs(decompose(hyper_bell(lab, m), rows) - expansion_matrix(lab))))
                    for lab in LABELS)
    checks["bell_expansions"] = _check(worst < 1e-12, worst)

    tuning = elements.tune_analyzer(m)
    dmap = elements.analyzer_chain(tuning.mzi_phase, m, tuning.input_phase)
    worst = 0.0
    for lab in LABELS:
        s = hyper_bell(lab, m)
        direct = np.abs(decompose(s, TARGET_BASIS)) ** 2
        worst = max(worst, float(np.max(np.abs(elements.chain_statistics(s, dmap) - direct))))
    checks["analyzer_chain"] = _check(dmap.valid and worst < 1e-9, worst,
                                      min_routing_fidelity=dmap.min_fidelity)

    t = {lab: np.abs(decompose(hyper_bell(lab, m), INITIAL_BASIS)) ** 2 for lab in LABELS}
    same = max(float(np.max(np.abs(t[BellLabel.PsiPlus] - t[BellLabel.PsiMinus]))),
               float(np.max(np.abs(t[BellLabel.PhiPlus] - t[BellLabel.PhiMinus]))))
    checks["initial_basis_degeneracy"] = _check(same < 1e-12, same)

    if unitary:
        res = search.criterion_check(u, cfg.eps_fire, m)
        checks["criterion"] = _check(res.passed, 0.0)
    else:
        checks["criterion"] = _check(False, math.inf)

    failed = [name for name, c in checks.items() if not c["passed"]]
    report = {
        "passed": not failed,
        "failed": failed,
        "checks": checks,
        "analyzer": {
            "mzi_phase": tuning.mzi_phase,
            "input_phase": tuning.input_phase,
            "detector_map": dmap.to_dict(),
            "composite": _complex_rows(dmap.composite.matrix),
            "routing_table": dmap.routing_table(TARGET_BASIS),
        },
    }
    return (EXIT_OK if not failed else EXIT_VERIFY), report


def cmd_coincidence(cfg: RunConfig, state: str, basis: str, total: int) -> dict:
    lab = BellLabel(state)
    m = cfg.subspace_m
    rows = search.target_basis(search.REFERENCE_U4) if basis == "target" else INITIAL_BASIS
    table = measurement.coincidence_table(hyper_bell(lab, m), rows)
    weight = dict((mm, abs(c) ** 2) for mm, c in cfg.source.weights).get(m, 0.0)
    out: dict[str, Any] = {"state": lab.value, "basis": basis, "subspace_m": m,
                           "subspace_weight": weight, "probabilities": table.values}
    if basis == "target":
        expected = channel.ideal_patterns(search.REFERENCE_U4, m)[lab]
        out["expected_pattern"] = expected.sorted()
    if total > 0:
        if cfg.seed is None:
            raise UsageError("--seed is required when --total > 0")
        noisy = measurement.apply_noise(table, measurement.NoiseModel(cfg.eps))
        counts = measurement.simulate_counts(noisy, int(round(total * weight)), cfg.seed)
        out["counts"] = counts.values.astype(int)
        if basis == "target" and counts.total() > 0:
            out["snr"] = measurement.snr(counts, expected)
    return out


def cmd_search(cfg: RunConfig, budget: int, out: str | None, max_len: int, workers: int) -> dict:
    sols = search.search(budget=budget, seed=cfg.seed, store=out, max_len=max_len,
                         eps_fire=cfg.eps_fire, m=cfg.subspace_m, workers=workers)
    ref = search.canonicalize(search.REFERENCE_U4)
    return {"budget": budget, "seed": cfg.seed, "n_solutions": len(sols),
            "contains_reference_class": any(s.canonical_key == ref for s in sols),
            "solutions": [{"found_at": s.found_at, "provenance": s.provenance,
                           "canonical_key": s.canonical_key} for s in sols]}


def _channel_summary(W: np.ndarray, tol: float) -> dict:
    cap = channel.capacity(W, tol)
    return {"mi_uniform_bits": channel.mutual_information(np.full(4, 0.25), W),
            "capacity_bits": cap.capacity, "p_star": cap.p_star, "iterations": cap.iterations}


def cmd_superdense(cfg: RunConfig, n: int, shots: int) -> dict:
    noise = measurement.NoiseModel(cfg.eps)
    msgs = channel.random_messages(n, [cfg.seed, 0])
    run = channel.superdense_run(msgs, noise, [cfg.seed, 1], cfg.codebook, shots, cfg.subspace_m)
    W = channel.confusion_matrix(noise, m=cfg.subspace_m)
    return {"n": n, "eps": cfg.eps, "shots": shots, "success_rate": run.success_rate,
            "confusion": W, **_channel_summary(W, cfg.tol)}


def cmd_capacity(cfg: RunConfig, confusion: str) -> dict:
    W = np.loadtxt(confusion, delimiter=",", comments="#", ndmin=2)
    return {"confusion": W, **_channel_summary(W, cfg.tol)}


def cmd_calibrate(target: float) -> dict:
    eps = channel.calibrate_noise(target)
    W = channel.confusion_matrix(measurement.NoiseModel(eps))
    return {"target_success": target, "eps": eps, "success": float(np.mean(np.diag(W)))}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="oambsm", description="OAM Bell-state measurement simulator")
    p.add_argument("--config", help="JSON or TOML run configuration")
    p.add_argument("--m", type=int, dest="subspace_m", help="OAM subspace (overrides config)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    v = sub.add_parser("verify", help="regression checks of basis, expansions and analyzer")
    v.add_argument("--out")

    c = sub.add_parser("coincidence", help="ideal and sampled coincidence tables")
    c.add_argument("--state", required=True, choices=[lab.value for lab in LABELS])
    c.add_argument("--basis", choices=["initial", "target"], default="target")
    c.add_argument("--total", type=int, default=0)
    c.add_argument("--eps", type=float)
    c.add_argument("--seed", type=int)
    c.add_argument("--format", choices=["json", "csv"], default="json")
    c.add_argument("--out")

    s = sub.add_parser("search", help="random toolbox search for valid U(4)")
    s.add_argument("--budget", type=int, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", help="JSON-lines solution store (appended)")
    s.add_argument("--max-len", type=int, default=8)
    s.add_argument("--workers", type=int, default=1)

    d = sub.add_parser("superdense", help="seeded superdense-coding run")
    d.add_argument("--n", type=int, required=True)
    d.add_argument("--eps", type=float)
    d.add_argument("--seed", type=int, required=True)
    d.add_argument("--codebook", help="JSON/TOML file with a codebook table")
    d.add_argument("--shots", type=int, default=1, help="coincidences per message")
    d.add_argument("--out")

    k = sub.add_parser("capacity", help="Blahut-Arimoto capacity of a 4x4 confusion CSV")
    k.add_argument("--confusion", required=True)
    k.add_argument("--out")

    b = sub.add_parser("calibrate", help="crosstalk strength for a target success rate")
    b.add_argument("--target", type=float, required=True)
    b.add_argument("--out")
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        for attr in ("confusion", "codebook"):
            path = getattr(args, attr, None)
            if path and not Path(path).exists():
                raise UsageError(f"file not found: {path}")
        overrides = {"subspace_m": args.subspace_m, "eps": getattr(args, "eps", None),
                     "seed": getattr(args, "seed", None)}
        cfg = RunConfig.from_sources(args.config, **overrides)
        if getattr(args, "codebook", None):
            raw = load_config_file(args.codebook)
            cfg.codebook = validate_codebook(raw.get("codebook", raw))

        if args.command == "verify":
            code, report = cmd_verify(cfg)
            _dump(report, args.out)
            if code:
                print(f"verification failed: {', '.join(report['failed'])}", file=sys.stderr)
            return code
        if args.command == "coincidence":
            result = cmd_coincidence(cfg, args.state, args.basis, args.total)
            if args.format == "csv":
                text = measurement.CoincidenceTable(result["probabilities"]).to_csv()
                if "counts" in result:
                    text += measurement.CoincidenceTable(result["counts"], "counts").to_csv()
                if args.out:
                    Path(args.out).write_text(text)
                print(text, end="")
            else:
                _dump(result, args.out)
            return EXIT_OK
        if args.command == "search":
            if args.budget < 0:
                raise UsageError("--budget must be >= 0")
            _dump(cmd_search(cfg, args.budget, args.out, args.max_len, args.workers))
            return EXIT_OK
        if args.command == "superdense":
            if args.n <= 0 or args.shots <= 0:
                raise UsageError("--n and --shots must be positive")
            _dump(cmd_superdense(cfg, args.n, args.shots), args.out)
            return EXIT_OK
        if args.command == "capacity":
            _dump(cmd_capacity(cfg, args.confusion), args.out)
            return EXIT_OK
        if args.command == "calibrate":
            _dump(cmd_calibrate(args.target), args.out)
            return EXIT_OK
    except channel.ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVERGE
    except (UsageError, StateError, NotUnitaryError, measurement.TableError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
