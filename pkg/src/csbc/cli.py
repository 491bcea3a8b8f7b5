"""Config-driven experiment runner.

One invocation runs one experiment described by a JSON config file and
writes a deterministic result file: identical config + seed (and build)
produce byte-identical output, independent of ``--threads``.

Exit codes: 0 success, 2 config error, 3 capability error (non-enumerable
strategy or branch budget), 1 internal failure.  Set ``CSBC_LOG`` to a
logging level name for progress output on stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import __version__, analysis, qsim, relativistic, strategies
from .branching import BranchCapacityError
from .protocol import run_protocol
from .streams import derive_rng

log = logging.getLogger("csbc")

KINDS = ("run", "mc", "exact", "info", "lemma1", "sweep", "rel", "punveil-check")
FORMATS = ("json", "csv")

CSV_COLUMNS = [
    "kind", "committer", "committer_params", "receiver", "receiver_params",
    "param", "p_a_detect", "stderr_a", "p_b_detect", "stderr_b",
    "info_bits", "mode", "n_trials", "master_seed",
]


class ConfigError(Exception):
    """Malformed experiment config; ``field`` names the offending key."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"config field {field_name!r}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: kind, strategies, trial count, seed, output format."""

    kind: str
    seed: int = 0
    n_trials: int = 10000
    committer: Optional[dict] = None
    receiver: Optional[dict] = None
    output_format: str = "json"
    extras: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("<root>", "config must be a JSON object")
        known = {"kind", "seed", "n_trials", "committer", "receiver",
                 "output_format", "extras"}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown config field")
        kind = raw.get("kind")
        if kind not in KINDS:
            raise ConfigError("kind", f"must be one of {KINDS}, got {kind!r}")
        fmt = raw.get("output_format", "json")
        if fmt not in FORMATS:
            raise ConfigError("output_format", f"must be one of {FORMATS}")
        seed = raw.get("seed", 0)
        if not isinstance(seed, int):
            raise ConfigError("seed", "must be an integer")
        n_trials = raw.get("n_trials", 10000)
        if not isinstance(n_trials, int) or n_trials < 1:
            raise ConfigError("n_trials", "must be a positive integer")
        for side in ("committer", "receiver"):
            spec = raw.get(side)
            if spec is not None and (
                not isinstance(spec, dict) or "kind" not in spec
            ):
                raise ConfigError(side, "must be an object with a 'kind'")
        extras = raw.get("extras", {})
        if not isinstance(extras, dict):
            raise ConfigError("extras", "must be an object")
        return cls(
            kind=kind,
            seed=seed,
            n_trials=n_trials,
            committer=raw.get("committer"),
            receiver=raw.get("receiver"),
            output_format=fmt,
            extras=extras,
        )

    def to_dict(self) -> dict:
        out: dict = {
            "kind": self.kind,
            "seed": self.seed,
            "n_trials": self.n_trials,
            "output_format": self.output_format,
        }
        if self.committer is not None:
            out["committer"] = self.committer
        if self.receiver is not None:
            out["receiver"] = self.receiver
        if self.extras:
            out["extras"] = self.extras
        return out

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("<json>", f"not valid JSON: {exc}") from exc
        return cls.from_dict(raw)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def _strategy(cfg: ExperimentConfig, side: str, role: str):
    spec = getattr(cfg, side)
    if spec is None:
        raise ConfigError(side, f"required for kind {cfg.kind!r}")
    try:
        return strategies.build(role, spec["kind"], spec.get("params", {}))
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"{side}.kind", str(exc)) from exc


def _strategy_id(spec: Optional[dict]) -> tuple[str, str]:
    if spec is None:
        return "", ""
    params = {k: v for k, v in spec.get("params", {}).items()}
    return spec["kind"], json.dumps(params, sort_keys=True)


def _report_row(cfg: ExperimentConfig, **values) -> dict:
    ckind, cparams = _strategy_id(cfg.committer)
    rkind, rparams = _strategy_id(cfg.receiver)
    row = {col: "" for col in CSV_COLUMNS}
    row.update(
        kind=cfg.kind,
        committer=ckind,
        committer_params=cparams,
        receiver=rkind,
        receiver_params=rparams,
        master_seed=cfg.seed,
    )
    row.update(values)
    return row


# -- experiment handlers -----------------------------------------------------


def _handle_run(cfg: ExperimentConfig) -> tuple[dict, list[dict]]:
    strat_a = _strategy(cfg, "committer", "A")
    strat_b = _strategy(cfg, "receiver", "B")
    transcript = run_protocol(strat_a, strat_b, cfg.seed)
    result = transcript.to_json_dict()
    row = _report_row(
        cfg,
        p_a_detect=transcript.a_detected,
        p_b_detect=transcript.b_detected,
        mode="run",
        n_trials=1,
    )
    return result, [row]


def _handle_mc(cfg: ExperimentConfig, threads: int) -> tuple[dict, list[dict]]:
    strat_a = _strategy(cfg, "committer", "A")
    strat_b = _strategy(cfg, "receiver", "B")
    log.info("monte carlo: %d trials, seed %d", cfg.n_trials, cfg.seed)
    report = analysis.detection_mc(strat_a, strat_b, cfg.n_trials, cfg.seed, threads)
    row = _report_row(
        cfg,
        p_a_detect=report.p_a_detect,
        stderr_a=report.stderr_a,
        p_b_detect=report.p_b_detect,
        stderr_b=report.stderr_b,
        mode=report.mode,
        n_trials=report.n_trials,
    )
    return report.to_json_dict(), [row]


def _handle_exact(cfg: ExperimentConfig) -> tuple[dict, list[dict]]:
    strat_a = _strategy(cfg, "committer", "A")
    strat_b = _strategy(cfg, "receiver", "B")
    report = analysis.detection_exact(strat_a, strat_b)
    row = _report_row(
        cfg,
        p_a_detect=report.p_a_detect,
        stderr_a=0.0,
        p_b_detect=report.p_b_detect,
        stderr_b=0.0,
        mode=report.mode,
        n_trials=report.n_trials,
    )
    return report.to_json_dict(), [row]


def _handle_info(cfg: ExperimentConfig) -> tuple[dict, list[dict]]:
    strat_b = _strategy(cfg, "receiver", "B")
    prior = tuple(cfg.extras.get("prior", (0.5, 0.5)))
    if len(prior) != 2 or abs(sum(prior) - 1.0) > 1e-9:
        raise ConfigError("extras.prior", "must be two probabilities summing to 1")
    report = analysis.info_gain(strat_b, prior)
    row = _report_row(
        cfg, info_bits=report.mutual_information, mode="exact", n_trials=0
    )
    return report.to_json_dict(), [row]


def _lemma1_set(cfg: ExperimentConfig, spec: dict, index: int):
    where = f"extras.sets[{index}]"
    if "ops" in spec:
        try:
            ops = [np.asarray(
                [[complex(re, im) for re, im in row] for row in op]
            ) for op in spec["ops"]]
            m = spec.get("ancilla_dim", ops[0].shape[0] // 2)
            return qsim.KrausSet(ops=tuple(ops)), int(m)
        except (TypeError, ValueError, qsim.QsimError) as exc:
            raise ConfigError(where, f"bad explicit operator set: {exc}") from exc
    generator = spec.get("generator")
    m = int(spec.get("ancilla_dim", 2))
    n_ops = int(spec.get("n_ops", 2))
    rng = derive_rng(cfg.seed, index)
    if generator == "factored":
        kraus, _ = analysis.random_factored_kraus(m, n_ops, rng)
        return kraus, m
    if generator == "slot_rotated":
        theta = float(spec.get("theta", 0.3))
        base, _ = analysis.random_factored_kraus(m, n_ops, rng)
        return analysis.slot_rotated_kraus(base, m, theta, rng), m
    raise ConfigError(where, f"unknown generator {generator!r}")


def _handle_lemma1(cfg: ExperimentConfig) -> tuple[dict, list[dict]]:
    sets = cfg.extras.get("sets")
    if not isinstance(sets, list) or not sets:
        raise ConfigError("extras.sets", "must be a non-empty list")
    results = []
    rows = []
    for i, spec in enumerate(sets):
        kraus, m = _lemma1_set(cfg, spec, i)
        verdict = analysis.lemma1_factor(kraus, m)
        entry = verdict.to_json_dict()
        entry["set_index"] = i
        entry["offidentity_norm"] = analysis.slot_offidentity_norm(kraus, m)
        results.append(entry)
        rows.append(
            _report_row(
                cfg,
                param=i,
                p_a_detect="",
                mode="factored" if verdict.factored else "flagged",
                n_trials=len(kraus.ops),
            )
        )
    return {"sets": results}, rows


_SWEEP_FAMILIES = {
    "weak_coupling": lambda theta: strategies.ancilla_receiver(
        strategies.weak_coupling_attack(theta)
    ),
    "measuring_angle": strategies.measuring_receiver,
}


def _handle_sweep(cfg: ExperimentConfig) -> tuple[dict, list[dict]]:
    family = cfg.extras.get("family")
    if family not in _SWEEP_FAMILIES:
        raise ConfigError(
            "extras.family", f"must be one of {sorted(_SWEEP_FAMILIES)}"
        )
    grid = cfg.extras.get("grid")
    if not isinstance(grid, list) or not grid:
        raise ConfigError("extras.grid", "must be a non-empty list of numbers")
    log.info("sweep: family %s over %d points", family, len(grid))
    points = analysis.tradeoff_sweep(_SWEEP_FAMILIES[family], grid)
    rows = [
        _report_row(
            cfg,
            param=pt.param,
            p_a_detect=pt.p_detect,
            info_bits=pt.info_bits,
            mode="exact",
            n_trials=0,
        )
        for pt in points
    ]
    return {"points": [pt.to_json_dict() for pt in points]}, rows


def _handle_rel(cfg: ExperimentConfig) -> tuple[dict, list[dict]]:
    extras = cfg.extras
    try:
        sites = relativistic.SiteConfig(
            positions=extras.get(
                "positions", relativistic.default_sites().positions
            ),
            approx_ratio=float(extras.get("approx_ratio", 2.0)),
            scale_ratio=float(extras.get("scale_ratio", 10.0)),
        )
    except relativistic.GeometryError as exc:
        raise ConfigError("extras.positions", str(exc)) from exc
    bit = extras.get("bit", 0)
    b_strategy = extras.get("b_strategy", "honest")
    if isinstance(b_strategy, dict):
        b_strategy = ("measure", float(b_strategy.get("measure", 0.0)))
    try:
        transcript = relativistic.run_rel_protocol(
            sites,
            bit,
            b_strategy=b_strategy,
            coin_source=extras.get("coin", "fair"),
            seed=cfg.seed,
            t_coin=float(extras.get("t_coin", 500.0)),
        )
    except ValueError as exc:
        raise ConfigError("extras", str(exc)) from exc
    row = _report_row(
        cfg,
        param=transcript.coin,
        p_a_detect=transcript.detection,
        mode="causality_ok" if transcript.causality_ok else "causality_violated",
        n_trials=1,
    )
    return transcript.to_json_dict(), [row]


def _handle_punveil(cfg: ExperimentConfig, threads: int) -> tuple[dict, list[dict]]:
    seed = int(cfg.extras.get("commitment_seed", cfg.seed))
    qubits = int(cfg.extras.get("ancilla_qubits", 2))
    ec = strategies.random_valid_commitment(derive_rng(seed, 0), qubits)
    check = analysis.verify_punveil_vs_protocol(ec, cfg.n_trials, cfg.seed, threads)
    row = _report_row(
        cfg,
        p_a_detect=check.empirical_p0,
        stderr_a=check.stderr,
        param=check.expected_p0,
        mode="within_4_sigma" if check.within_4_sigma else "outside_4_sigma",
        n_trials=check.n_trials,
    )
    return check.to_json_dict(), [row]


# -- output ------------------------------------------------------------------


def _render(cfg: ExperimentConfig, result: dict, rows: list[dict]) -> str:
    if cfg.output_format == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
        return buf.getvalue()
    doc = {"master_seed": cfg.seed, "kind": cfg.kind, "result": result}
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def run_experiment(cfg: ExperimentConfig, threads: int = 1) -> str:
    """Execute one experiment and return the rendered output text."""
    if cfg.kind == "run":
        result, rows = _handle_run(cfg)
    elif cfg.kind == "mc":
        result, rows = _handle_mc(cfg, threads)
    elif cfg.kind == "exact":
        result, rows = _handle_exact(cfg)
    elif cfg.kind == "info":
        result, rows = _handle_info(cfg)
    elif cfg.kind == "lemma1":
        result, rows = _handle_lemma1(cfg)
    elif cfg.kind == "sweep":
        result, rows = _handle_sweep(cfg)
    elif cfg.kind == "rel":
        result, rows = _handle_rel(cfg)
    elif cfg.kind == "punveil-check":
        result, rows = _handle_punveil(cfg, threads)
    else:  # pragma: no cover - from_dict already rejects these
        raise ConfigError("kind", f"unhandled kind {cfg.kind!r}")
    return _render(cfg, result, rows)


def _setup_logging() -> None:
    level_name = os.environ.get("CSBC_LOG", "").strip().upper()
    if level_name:
        logging.basicConfig(
            level=getattr(logging, level_name, logging.INFO), stream=sys.stderr
        )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="csbc",
        description="Run one cheat-sensitive bit commitment experiment.",
    )
    parser.add_argument("--config", required=True, help="experiment config (JSON)")
    parser.add_argument("--out", help="output path (default: stdout)")
    parser.add_argument(
        "--format", choices=FORMATS, help="override the config's output format"
    )
    parser.add_argument("--seed", type=int, help="override the config's seed")
    parser.add_argument(
        "--threads",
        type=int,
        default=os.cpu_count() or 1,
        help="Monte Carlo worker processes (results are thread-count independent)",
    )
    parser.add_argument("--version", action="version", version=__version__)
    args = parser.parse_args(argv)
    _setup_logging()

    try:
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                cfg = ExperimentConfig.from_json(fh.read())
        except OSError as exc:
            raise ConfigError("<path>", f"cannot read config: {exc}") from exc
        if args.seed is not None:
            cfg = ExperimentConfig.from_dict({**cfg.to_dict(), "seed": args.seed})
        if args.format is not None:
            cfg = ExperimentConfig.from_dict(
                {**cfg.to_dict(), "output_format": args.format}
            )
        text = run_experiment(cfg, threads=max(1, args.threads))
    except ConfigError as exc:
        print(f"csbc: config error: {exc}", file=sys.stderr)
        return 2
    except (analysis.NotEnumerableError, BranchCapacityError) as exc:
        print(f"csbc: not supported: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # internal failure contract
        log.exception("internal error")
        print(f"csbc: internal error: {exc}", file=sys.stderr)
        return 1

    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
