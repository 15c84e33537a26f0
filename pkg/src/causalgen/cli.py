"""Command-line surface: discovery, effect estimation, test generation,
technique comparison, and report emission.

Every command is a thin shell over the library; all randomness flows from
explicit seeds, and the comparison results tree is deterministic for a
fixed configuration and master seed (timings appear only in per-run files,
never in aggregates).

Exit codes: 0 success, 2 usage or validation failure, 3 runtime failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .baselines import ArtConfig, GaConfig, art, random_baseline, random_database, sbst_ml
from .data import load_dataset, load_schema
from .discovery import DiscoveryConfig, discover_cpdag, pc_skeleton
from .engine import EngineConfig, EngineError, SessionReport, run_session
from .graphs import BackgroundKnowledge, graph_to_dot, graph_to_text
from .intervention import InterventionSpec, estimate_effect, refute_placebo
from .metrics import ComparisonMatrix, dunn, efficiency_series, friedman, tsd_i
from .scm import Scm, ScmError
from .seeding import derive_seed
from .sutbench import SyntheticSut, available_benches, load_bench, load_sut

__all__ = [
    "UsageError",
    "ExperimentConfig",
    "main",
    "cmd_discover",
    "cmd_estimate",
    "cmd_generate",
    "cmd_compare",
    "cmd_report",
]

TECHNIQUES = ("rbst", "random", "art", "sbst-ml")
EXIT_OK = 0
EXIT_USAGE = 2
EXIT_RUNTIME = 3


class UsageError(ValueError):
    """Invalid arguments or configuration; maps to exit code 2."""


class RuntimeFailure(RuntimeError):
    """Failure during execution; maps to exit code 3."""


# --------------------------------------------------------------------- #
# shared helpers


def _load_sut_ref(ref: str) -> SyntheticSut:
    """A SUT reference is either `bench:<name>` or a spec file path."""
    if ref.startswith("bench:"):
        name = ref.split(":", 1)[1]
        if name not in available_benches():
            raise UsageError(
                f"unknown bench {name!r}; available: {', '.join(available_benches())}"
            )
        return load_bench(name)
    path = Path(ref)
    if not path.exists():
        raise UsageError(f"SUT spec file not found: {path}")
    return load_sut(path)


def parse_intervention(expression: str, model: Scm) -> InterventionSpec:
    """Parse `do VAR=LEVEL [VAR=LEVEL ...]` against a model's schema.

    Levels may be given as labels or as integer level codes.
    """
    tokens = expression.split()
    if not tokens or tokens[0] != "do":
        raise UsageError(f"intervention must start with 'do': {expression!r}")
    if len(tokens) < 2:
        raise UsageError("intervention needs at least one assignment: do VAR=LEVEL")
    assignments: dict[str, int] = {}
    for token in tokens[1:]:
        if token.count("=") != 1:
            raise UsageError(f"malformed assignment {token!r}; expected VAR=LEVEL")
        name, label = token.split("=")
        if not name or not label:
            raise UsageError(f"malformed assignment {token!r}; expected VAR=LEVEL")
        try:
            var = model.variable(name)
        except ScmError:
            raise UsageError(f"unknown variable {name!r}") from None
        if label in var.levels:
            level = var.levels.index(label)
        else:
            try:
                level = int(label)
            except ValueError:
                raise UsageError(
                    f"unknown level {label!r} for variable {name!r}; "
                    f"levels are {list(var.levels)}"
                ) from None
            if not 0 <= level < var.cardinality:
                raise UsageError(
                    f"level code {level} out of range for variable {name!r}"
                )
        if name in assignments:
            raise UsageError(f"variable {name!r} assigned twice")
        assignments[name] = level
    return InterventionSpec(assignments)


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_records_csv(report: SessionReport, input_names: tuple[str, ...], path: Path) -> None:
    header = ["index", "iteration", "phase", *input_names, "raw_output", "violation", "t_gen", "t_exec"]
    rows = []
    for rec in report.records:
        rows.append(
            [
                rec.index,
                rec.iteration,
                rec.phase,
                *[rec.inputs[name] for name in input_names],
                _fmt(float(rec.raw_output)),
                _fmt(rec.violation),
                _fmt(float(rec.t_gen)),
                _fmt(float(rec.t_exec)),
            ]
        )
    _write_csv(path, header, rows)


def _write_session_json(report: SessionReport, path: Path) -> None:
    payload = {
        "technique": report.technique,
        "sut": report.sut_name,
        "budget": report.budget,
        "executed": report.executed,
        "violations_search": report.violations(),
        "violations_total": report.violations(include_bootstrap=True),
        "model_snapshots": [list(s) for s in report.model_snapshots],
        "config": report.config,
    }
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


# --------------------------------------------------------------------- #
# discover


def cmd_discover(args) -> int:
    schema_path = Path(args.schema)
    data_path = Path(args.data)
    if not schema_path.exists():
        raise UsageError(f"schema file not found: {schema_path}")
    if not data_path.exists():
        raise UsageError(f"data file not found: {data_path}")
    schema = load_schema(schema_path)
    data = load_dataset(data_path, schema)
    knowledge = BackgroundKnowledge()
    if not args.no_output_sink:
        output = data.output_variable.name
        knowledge = BackgroundKnowledge.output_sink(
            tuple(n for n in data.names if n != output), output
        )
    config = DiscoveryConfig(
        alpha=args.alpha,
        max_cond_set_size=args.max_cond_set_size,
        knowledge=knowledge,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    skeleton = pc_skeleton(data, config)
    cpdag = discover_cpdag(data, config)
    (out / "graph.txt").write_text(graph_to_text(cpdag) + "\n")
    (out / "graph.dot").write_text(graph_to_dot(cpdag) + "\n")
    trace_rows = [
        [e.x, e.y, e.level, " ".join(e.sepset), _fmt(float(e.statistic)),
         e.dof, _fmt(float(e.p_value))]
        for e in skeleton.trace
    ]
    _write_csv(out / "trace.csv", ["x", "y", "level", "sepset", "statistic", "dof", "p_value"], trace_rows)
    n_edges = len(cpdag.directed) + len(cpdag.undirected)
    print(f"discovered {n_edges} edges over {len(cpdag.nodes)} variables; wrote {out}/graph.txt")
    return EXIT_OK


# --------------------------------------------------------------------- #
# estimate


def cmd_estimate(args) -> int:
    scm_path = Path(args.scm)
    if not scm_path.exists():
        raise UsageError(f"model file not found: {scm_path}")
    model = Scm.load(scm_path)
    spec = parse_intervention(args.intervention, model)
    encoding = None
    if args.encoding:
        try:
            encoding = [float(tok) for tok in args.encoding.split(",")]
        except ValueError:
            raise UsageError(f"encoding must be comma-separated numbers: {args.encoding!r}") from None
    estimate = estimate_effect(
        model,
        spec,
        args.outcome,
        encoding,
        method=args.method,
        n=args.samples,
        seed=args.seed,
    )
    print(
        f"E[{args.outcome} | {args.intervention}] = {estimate.value:.6f}  "
        f"ci95=[{estimate.ci_low:.6f}, {estimate.ci_high:.6f}]  "
        f"se={estimate.std_error:.6f}  method={estimate.method}  n={estimate.n_samples}"
    )
    payload = {"intervention": args.intervention, "outcome": args.outcome,
               "estimate": estimate.as_dict()}
    if args.refute:
        if not args.data:
            raise UsageError("--refute needs --data with the fitting dataset")
        data_path = Path(args.data)
        if not data_path.exists():
            raise UsageError(f"data file not found: {data_path}")
        data = load_dataset(data_path, model.variables)
        refutation = refute_placebo(
            model, spec, args.outcome, data, encoding,
            method=args.method, n=args.samples, seed=args.seed,
            k_placebos=args.placebos,
        )
        verdict = "SUSPICIOUS" if refutation.suspicious else "passed"
        print(
            f"placebo refutation: {verdict}  "
            f"(original {refutation.original.value:.6f}, placebo mean "
            f"{refutation.placebo_mean:.6f} sd {refutation.placebo_std:.6f}, "
            f"{len(refutation.placebo_values)} placebos)"
        )
        payload["refutation"] = refutation.as_dict()
    if args.out:
        Path(args.out).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


# --------------------------------------------------------------------- #
# generate


def cmd_generate(args) -> int:
    sut = _load_sut_ref(args.sut)
    config = EngineConfig(
        budget=args.budget,
        initial_random_tests=args.initial,
        variable_strategy=args.variable_strategy,
        value_strategy=args.value_strategy,
        value_sample_k=args.value_sample_k,
        estimation=args.estimation,
        estimation_samples=args.samples,
        tests_per_iteration=args.tests_per_iteration,
        rediscover_every=args.rediscover_every,
        objective=args.objective,
        seed=args.seed,
        refute=args.refute,
    )
    report = run_session(sut, config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_records_csv(report, sut.input_names, out / "records.csv")
    _write_session_json(report, out / "session.json")
    print(
        f"executed {report.executed} searched tests "
        f"({report.violations()} violations); wrote {out}/records.csv"
    )
    return EXIT_OK


# --------------------------------------------------------------------- #
# compare


@dataclass(frozen=True)
class ExperimentConfig:
    """Comparison experiment: a SUT, techniques, repetitions, and budgets."""

    sut: str
    techniques: tuple[str, ...]
    repetitions: int
    budget: int
    initial_tests: int = 100
    master_seed: int = 0
    out_dir: str = "results"
    objective: str = "minimize"
    efficiency_interval: int = 20
    engine: dict = field(default_factory=dict)
    art: dict = field(default_factory=dict)
    ga: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "techniques", tuple(self.techniques))
        if not self.techniques:
            raise UsageError("at least one technique is required")
        for tech in self.techniques:
            if tech not in TECHNIQUES:
                raise UsageError(
                    f"unknown technique {tech!r}; choose from {', '.join(TECHNIQUES)}"
                )
        if len(set(self.techniques)) != len(self.techniques):
            raise UsageError("duplicate technique names")
        if self.repetitions < 1:
            raise UsageError("repetitions must be >= 1")
        if self.budget < 1:
            raise UsageError("budget must be >= 1")
        if self.initial_tests < 1:
            raise UsageError("initial_tests must be >= 1")
        if self.efficiency_interval < 1:
            raise UsageError("efficiency_interval must be >= 1")
        if self.objective not in ("minimize", "maximize"):
            raise UsageError(f"unknown objective {self.objective!r}")
        reserved = {"budget", "initial_random_tests", "seed", "objective"}
        overlap = reserved & set(self.engine)
        if overlap:
            raise UsageError(
                f"engine overrides {sorted(overlap)} are set by top-level fields"
            )
        # fail early on typos in the override blocks
        EngineConfig(**self.engine)
        ArtConfig(**self.art)
        GaConfig(**self.ga)

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        path = Path(path)
        if not path.exists():
            raise UsageError(f"experiment config not found: {path}")
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise UsageError(f"experiment config {path} is not valid JSON: {exc}") from None
        if not isinstance(raw, dict):
            raise UsageError("experiment config must be a JSON object")
        known = set(cls.__dataclass_fields__)
        unknown = set(raw) - known
        if unknown:
            raise UsageError(f"unknown experiment config fields: {sorted(unknown)}")
        missing = {"sut", "techniques", "repetitions", "budget"} - set(raw)
        if missing:
            raise UsageError(f"experiment config missing fields: {sorted(missing)}")
        try:
            return cls(**raw)
        except TypeError as exc:
            raise UsageError(f"invalid experiment config: {exc}") from None

    def engine_config(self, seed: int) -> EngineConfig:
        return EngineConfig(
            budget=self.budget,
            initial_random_tests=self.initial_tests,
            seed=seed,
            objective=self.objective,
            **self.engine,
        )


def run_one(config: ExperimentConfig, technique: str, rep: int) -> SessionReport:
    """One (technique, repetition) session with its derived run seed."""
    sut = _load_sut_ref(config.sut)
    run_seed = derive_seed(config.master_seed, technique, rep)
    if technique == "rbst":
        return run_session(sut, config.engine_config(run_seed))
    if technique == "random":
        return random_baseline(sut, config.budget, run_seed)
    if technique == "art":
        return art(sut, config.budget, ArtConfig(**config.art), run_seed)
    if technique == "sbst-ml":
        initial, _ = random_database(sut, config.initial_tests, run_seed)
        return sbst_ml(
            sut, config.budget, GaConfig(**config.ga), initial, run_seed, config.objective
        )
    raise UsageError(f"unknown technique {technique!r}")


def _run_dir(out_dir: Path, technique: str, rep: int) -> Path:
    return out_dir / "runs" / technique / f"rep_{rep:02d}"


def _execute_and_write(payload: tuple[dict, str, int]) -> tuple[str, int, str | None]:
    """Worker body for one run; returns (technique, rep, error message or None)."""
    raw_config, technique, rep = payload
    config = ExperimentConfig(**raw_config)
    run_dir = _run_dir(Path(config.out_dir), technique, rep)
    run_dir.mkdir(parents=True, exist_ok=True)
    try:
        report = run_one(config, technique, rep)
        sut = _load_sut_ref(config.sut)
        write_records_csv(report, sut.input_names, run_dir / "records.csv")
        _write_session_json(report, run_dir / "session.json")
        return technique, rep, None
    except Exception as exc:  # per-run isolation: record and continue
        (run_dir / "FAILED.txt").write_text(f"{type(exc).__name__}: {exc}\n")
        return technique, rep, f"{type(exc).__name__}: {exc}"


def _read_run_records(run_dir: Path) -> list[dict]:
    with (run_dir / "records.csv").open(newline="") as fh:
        return list(csv.DictReader(fh))


def _search_rows(rows: list[dict]) -> list[dict]:
    return [r for r in rows if r["phase"] == "search"]


def _input_columns(rows: list[dict]) -> list[str]:
    header = list(rows[0].keys())
    start = header.index("phase") + 1
    end = header.index("raw_output")
    return header[start:end]


def _aggregate(config: ExperimentConfig, completed: dict[tuple[str, int], bool]) -> None:
    out_dir = Path(config.out_dir)
    agg = out_dir / "aggregate"
    agg.mkdir(parents=True, exist_ok=True)

    violation_rows: list[list] = []
    efficiency_rows: list[list] = []
    output_rows: list[list] = []
    tsd_rows: list[list] = []
    counts: dict[tuple[str, int], int] = {}

    for technique in config.techniques:
        for rep in range(config.repetitions):
            if not completed.get((technique, rep)):
                continue
            rows = _read_run_records(_run_dir(out_dir, technique, rep))
            searched = _search_rows(rows)
            n_viol = sum(1 for r in searched if r["violation"] == "true")
            counts[(technique, rep)] = n_viol
            violation_rows.append([technique, rep, n_viol])

            interval = config.efficiency_interval
            series: list[int] = []
            for i, r in enumerate(searched):
                if i % interval == 0:
                    series.append(0)
                if r["violation"] == "true":
                    series[-1] += 1
            cumulative = 0
            for checkpoint, v in enumerate(series, start=1):
                cumulative += v
                efficiency_rows.append([technique, rep, checkpoint, v, cumulative])

            for i, r in enumerate(searched):
                output_rows.append([technique, rep, i, _fmt(float(r["raw_output"]))])

            input_cols = _input_columns(rows)
            suite = [tuple(r[c] for c in input_cols) for r in searched]
            if len(suite) >= 2:
                tsd_rows.append([technique, rep, _fmt(tsd_i(suite))])

    _write_csv(agg / "violations.csv", ["technique", "rep", "violations"], violation_rows)
    _write_csv(
        agg / "efficiency.csv",
        ["technique", "rep", "checkpoint", "violations", "cumulative"],
        efficiency_rows,
    )
    _write_csv(agg / "outputs.csv", ["technique", "rep", "exec_index", "raw_output"], output_rows)
    _write_csv(agg / "tsd.csv", ["technique", "rep", "tsd_i"], tsd_rows)

    complete_reps = [
        rep
        for rep in range(config.repetitions)
        if all(completed.get((t, rep)) for t in config.techniques)
    ]
    if len(config.techniques) >= 2 and len(complete_reps) >= 2:
        matrix = ComparisonMatrix(
            config.techniques,
            [[counts[(t, rep)] for t in config.techniques] for rep in complete_reps],
        )
        fr = friedman(matrix)
        _write_csv(
            agg / "stats_violations_friedman.csv",
            ["statistic", "dof", "p_value", *config.techniques],
            [[_fmt(fr.statistic), fr.dof, _fmt(fr.p_value), *[_fmt(r) for r in fr.mean_ranks]]],
        )
        dn = dunn(matrix)
        pair_rows = []
        for i, a in enumerate(config.techniques):
            for b in config.techniques[i + 1:]:
                z, p_raw, p_adj = dn.pair(a, b)
                pair_rows.append([a, b, _fmt(z), _fmt(p_raw), _fmt(p_adj)])
        _write_csv(
            agg / "stats_violations_dunn.csv",
            ["a", "b", "z", "p_raw", "p_adjusted"],
            pair_rows,
        )
    else:
        print(
            "warning: not enough complete repetitions for rank statistics; "
            "skipping stats files",
            file=sys.stderr,
        )


def cmd_compare(args) -> int:
    config = ExperimentConfig.load(args.config)
    overrides = {
        "repetitions": args.repetitions,
        "budget": args.budget,
        "master_seed": args.master_seed,
        "out_dir": args.out_dir,
    }
    # flags fill fields the file left at their defaults; a file that sets
    # the field explicitly wins, with a warning on any conflict
    defaults = {"master_seed": 0, "out_dir": "results"}
    fields = dict(asdict(config))
    updates = {}
    for name, value in overrides.items():
        if value is None or fields[name] == value:
            continue
        if name in defaults and fields[name] == defaults[name]:
            updates[name] = value
        else:
            print(
                f"warning: config file {name}={fields[name]!r} overrides "
                f"flag value {value!r}",
                file=sys.stderr,
            )
    if updates:
        fields.update(updates)
        config = ExperimentConfig(**fields)

    sut = _load_sut_ref(config.sut)  # fail fast before spending runtime
    del sut
    out_dir = Path(config.out_dir)
    (out_dir / "runs").mkdir(parents=True, exist_ok=True)
    echo = dict(asdict(config))
    (out_dir / "config.json").write_text(json.dumps(echo, indent=2, sort_keys=True) + "\n")

    tasks = [
        (asdict(config), technique, rep)
        for technique in config.techniques
        for rep in range(config.repetitions)
    ]
    results: list[tuple[str, int, str | None]] = []
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_execute_and_write, tasks))
    else:
        results = [_execute_and_write(task) for task in tasks]

    completed: dict[tuple[str, int], bool] = {}
    failures = 0
    for technique, rep, error in results:
        completed[(technique, rep)] = error is None
        if error is not None:
            failures += 1
            print(f"warning: run {technique}/rep_{rep:02d} failed: {error}", file=sys.stderr)

    for technique in config.techniques:
        if not any(completed.get((technique, rep)) for rep in range(config.repetitions)):
            raise RuntimeFailure(
                f"all repetitions failed for technique {technique!r}; "
                f"partial results kept in {out_dir}"
            )

    _aggregate(config, completed)
    done = len(results) - failures
    print(f"completed {done}/{len(results)} runs; aggregates in {out_dir / 'aggregate'}")
    return EXIT_OK


# --------------------------------------------------------------------- #
# report


def _read_csv(path: Path) -> list[dict]:
    with path.open(newline="") as fh:
        return list(csv.DictReader(fh))


def cmd_report(args) -> int:
    tree = Path(args.results)
    config_path = tree / "config.json"
    if not config_path.exists():
        raise UsageError(f"results tree has no config.json: {tree}")
    config = json.loads(config_path.read_text())
    techniques = list(config.get("techniques", []))
    repetitions = int(config.get("repetitions", 0))
    if not techniques:
        raise UsageError("results tree config lists no techniques")

    missing = []
    for technique in techniques:
        for rep in range(repetitions):
            run = _run_dir(tree, technique, rep)
            if not (run / "records.csv").exists():
                missing.append(str(run.relative_to(tree)))
    if missing:
        raise RuntimeFailure("results tree is missing runs: " + ", ".join(missing))

    agg = tree / "aggregate"
    needed = ["violations.csv", "efficiency.csv", "outputs.csv", "tsd.csv"]
    absent = [n for n in needed if not (agg / n).exists()]
    if absent:
        raise RuntimeFailure("aggregate files missing: " + ", ".join(absent))

    report_dir = tree / "report"
    report_dir.mkdir(parents=True, exist_ok=True)

    violation_rows = _read_csv(agg / "violations.csv")
    _write_csv(
        report_dir / "plot_violations.csv",
        ["technique", "rep", "violations"],
        [[r["technique"], r["rep"], r["violations"]] for r in violation_rows],
    )

    efficiency_rows = _read_csv(agg / "efficiency.csv")
    by_checkpoint: dict[tuple[str, int], list[int]] = {}
    for r in efficiency_rows:
        key = (r["technique"], int(r["checkpoint"]))
        by_checkpoint.setdefault(key, []).append(int(r["cumulative"]))
    eff_out: list[list] = []
    for technique in techniques:
        checkpoints = sorted(c for (t, c) in by_checkpoint if t == technique)
        for checkpoint in checkpoints:
            vals = by_checkpoint[(technique, checkpoint)]
            eff_out.append([technique, checkpoint, _fmt(sum(vals) / len(vals))])
    _write_csv(
        report_dir / "plot_efficiency.csv",
        ["technique", "checkpoint", "mean_cumulative_violations"],
        eff_out,
    )

    output_rows = _read_csv(agg / "outputs.csv")
    _write_csv(
        report_dir / "plot_outputs.csv",
        ["technique", "raw_output"],
        [[r["technique"], r["raw_output"]] for r in output_rows],
    )

    tsd_rows = _read_csv(agg / "tsd.csv")
    _write_csv(
        report_dir / "plot_tsd.csv",
        ["technique", "rep", "tsd_i"],
        [[r["technique"], r["rep"], r["tsd_i"]] for r in tsd_rows],
    )

    lines = [f"techniques: {', '.join(techniques)}", f"repetitions: {repetitions}", ""]
    lines.append("violations per session (search phase)")
    viols: dict[str, list[float]] = {t: [] for t in techniques}
    for r in violation_rows:
        viols[r["technique"]].append(float(r["violations"]))
    for technique in techniques:
        vals = viols[technique]
        if vals:
            lines.append(
                f"  {technique}: median {statistics.median(vals):g} "
                f"mean {statistics.fmean(vals):.3f} over {len(vals)} runs"
            )
    lines.append("")
    lines.append("raw output over executed tests")
    outs: dict[str, list[float]] = {t: [] for t in techniques}
    for r in output_rows:
        outs[r["technique"]].append(float(r["raw_output"]))
    for technique in techniques:
        vals = outs[technique]
        if vals:
            lines.append(
                f"  {technique}: median {statistics.median(vals):.4f} "
                f"mean {statistics.fmean(vals):.4f}"
            )
    lines.append("")
    lines.append("suite diversity (input test set diameter)")
    tsds: dict[str, list[float]] = {t: [] for t in techniques}
    for r in tsd_rows:
        tsds[r["technique"]].append(float(r["tsd_i"]))
    for technique in techniques:
        vals = tsds[technique]
        if vals:
            lines.append(f"  {technique}: mean {statistics.fmean(vals):.4f}")

    fr_path = agg / "stats_violations_friedman.csv"
    if fr_path.exists():
        fr = _read_csv(fr_path)[0]
        lines.append("")
        lines.append(
            f"friedman: statistic {float(fr['statistic']):.4f} "
            f"dof {fr['dof']} p {float(fr['p_value']):.6g}"
        )
    dn_path = agg / "stats_violations_dunn.csv"
    if dn_path.exists():
        lines.append("dunn pairwise (holm-adjusted)")
        for r in _read_csv(dn_path):
            lines.append(
                f"  {r['a']} vs {r['b']}: z {float(r['z']):.4f} "
                f"p_adj {float(r['p_adjusted']):.6g}"
            )
    (report_dir / "summary.txt").write_text("\n".join(lines) + "\n")
    print(f"wrote 4 plot-data files and summary.txt to {report_dir}")
    return EXIT_OK


# --------------------------------------------------------------------- #
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="causalgen",
        description="Causal-model-driven test generation and evaluation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("discover", help="discover a causal graph from a dataset")
    p.add_argument("data", help="CSV data file")
    p.add_argument("schema", help="JSON schema file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--max-cond-set-size", type=int, default=3)
    p.add_argument(
        "--no-output-sink",
        action="store_true",
        help="drop the output-variable-is-a-sink assumption",
    )
    p.set_defaults(func=cmd_discover)

    p = sub.add_parser("estimate", help="estimate an interventional effect on a model")
    p.add_argument("scm", help="model JSON file")
    p.add_argument("intervention", help="expression: do VAR=LEVEL [VAR=LEVEL ...]")
    p.add_argument("outcome", help="outcome variable name")
    p.add_argument("--method", choices=["auto", "exact", "simulation"], default="auto")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--encoding", help="comma-separated numeric value per outcome level")
    p.add_argument("--refute", action="store_true", help="run placebo refutation")
    p.add_argument("--placebos", type=int, default=20)
    p.add_argument("--data", help="fitting dataset CSV (needed for --refute)")
    p.add_argument("--out", help="write the structured result to this JSON file")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("generate", help="run one causal test generation session")
    p.add_argument("sut", help="SUT spec path or bench:<name>")
    p.add_argument("--budget", type=int, default=100)
    p.add_argument("--initial", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--objective", choices=["minimize", "maximize"], default="minimize")
    p.add_argument(
        "--variable-strategy", choices=["random", "objective", "uncertainty"], default="random"
    )
    p.add_argument("--value-strategy", choices=["exhaustive", "sampling"], default="exhaustive")
    p.add_argument("--value-sample-k", type=int, default=3)
    p.add_argument("--estimation", choices=["auto", "exact", "simulation"], default="auto")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--tests-per-iteration", type=int, default=1)
    p.add_argument("--rediscover-every", type=int, default=10)
    p.add_argument("--refute", action="store_true")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("compare", help="compare techniques over repeated sessions")
    p.add_argument("config", help="experiment config JSON")
    p.add_argument("--jobs", type=int, default=1, help="parallel session workers")
    p.add_argument("--repetitions", type=int)
    p.add_argument("--budget", type=int)
    p.add_argument("--master-seed", type=int)
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("report", help="summarize a comparison results tree")
    p.add_argument("results", help="results tree from compare")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        # validation failures raised by the library (bad alpha, unknown
        # variable, malformed files) are usage errors at the CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RuntimeFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
