"""Command-line entry point: ``collab-bai {gen,run,sweep,signid,oracle,plot,replay}``.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
Config precedence: command-line flags > ``--config`` file > built-in defaults.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import io
import json
import logging
import math
import secrets
import sys
from pathlib import Path

from . import __version__, _kernels, engine
from .arms import (
    Instance,
    PyramidParams,
    gen_custom,
    gen_one_spike,
    gen_pyramid,
    gen_signid,
    hardness,
    pyramid_default_n,
)
from .errors import GeneratorError, NotFound, TranscriptError, UsageError
from .experiments import (
    AlgoConfig,
    FixedSchedulePolicy,
    estimate_error,
    exact_error_oracle,
    signid_instance,
    signid_run,
    speedup_table,
)
from .rng import SeededRng

log = logging.getLogger("collab_bai")

ERRORS_HEADER = ["variant", "K", "T", "R", "trials", "failures", "rate", "ci_low", "ci_high", "seed"]
SPEEDUP_HEADER = ["K", "R", "target_err", "T_star", "baseline_T", "speedup", "seed"]

C_ALG = 64.0
SPEEDUP_DEFINITION = (
    "empirical speedup = baseline_T / T_star, both the smallest horizon whose "
    "Monte-Carlo error is <= target_err on this single instance; baseline is "
    "centralized successive rejects. Not the all-instance dominance speedup."
)

DEFAULTS = {
    "run": {
        "variant": "basic", "K": 16, "T": None, "R": 2, "trials": 200, "seed": None,
        "delta": 0.05, "se_delta": engine.SE_DELTA, "replication": None, "c_alg": C_ALG,
        "transcript": False,
    },
    "sweep": {
        "K": 64, "R": "1,2,3", "target_err": 0.1, "trials": 400, "seed": None, "rel_tol": 0.02,
    },
    "signid": {
        "delta": 0.25, "K": 16, "T": 2000, "R": 2, "trials": 500, "seed": None, "variant": "basic",
    },
    "oracle": {"schedule": "2,2", "trials": 10000, "seed": None},
}
INSTANCE_KEYS = {"instance", "means", "gen", "n", "gap", "B", "L", "best", "gen_seed"}


class CliUsage(UsageError):
    pass


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise CliUsage(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text) -> list[int]:
    if isinstance(text, int):
        return [text]
    try:
        return [int(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise CliUsage(f"expected comma-separated integers, got {text!r}") from None


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def write_csv(path: Path, header: list[str], rows: list[list]) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    data = buf.getvalue().encode()
    path.write_bytes(data)
    return data


def _fmt(x: float) -> str:
    return repr(float(x))


# ---------------------------------------------------------------- instances

def build_instance(cfg: dict) -> Instance:
    given = [k for k in ("instance", "means", "gen") if cfg.get(k) not in (None, "")]
    if len(given) != 1:
        raise CliUsage("give exactly one instance source: --instance, --means or --gen")
    src = given[0]
    if src == "instance":
        try:
            return Instance.from_json(Path(cfg["instance"]).read_text())
        except OSError as exc:
            raise CliUsage(f"--instance: cannot read {cfg['instance']}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise CliUsage(f"--instance: not valid JSON ({exc})") from None
    if src == "means":
        return gen_custom(cfg["means"] if isinstance(cfg["means"], list) else _floats(cfg["means"]))
    return generate(cfg["gen"], cfg)


def generate(kind: str, cfg: dict) -> Instance:
    rng = SeededRng(int(cfg.get("gen_seed") or 0), 0)
    if kind == "one-spike":
        if cfg.get("n") is None or cfg.get("gap") is None:
            raise CliUsage("--gen one-spike needs --n and --gap")
        best = cfg.get("best")
        return gen_one_spike(int(cfg["n"]), float(cfg["gap"]), int(best or 0))
    if kind == "pyramid":
        B, L = int(cfg.get("B") or 2), int(cfg.get("L") or 3)
        n = cfg.get("n") or pyramid_default_n(B, L)
        return gen_pyramid(PyramidParams(B, L, int(n)), rng)
    raise CliUsage(f"unknown generator {kind!r}")



# ---------------------------------------------------------------- commands

def default_horizon(instance: Instance, K: int, R: int, c_alg: float = C_ALG) -> int:
    """c_alg * H * ln(H K) / K^{(R-1)/R}, the horizon scale at which the basic algorithm succeeds."""
    h = hardness(instance)
    if h <= 0:
        return 1
    return max(1, int(c_alg * h * math.log(max(h * K, math.e)) / K ** ((R - 1) / R)))


def do_run(cfg: dict, out: Path) -> dict:
    inst = build_instance(cfg)
    Ts = _ints(cfg["T"]) if cfg.get("T") not in (None, "") else [
        default_horizon(inst, int(cfg["K"]), int(cfg["R"]), float(cfg["c_alg"]))
    ]
    rows = []
    for T in Ts:
        algo = AlgoConfig(
            cfg["variant"], K=int(cfg["K"]), T=T, R=int(cfg["R"]), delta=float(cfg["delta"]),
            se_delta=float(cfg["se_delta"]),
            replication=None if cfg.get("replication") in (None, "") else float(cfg["replication"]),
        )
        est = estimate_error(algo, inst, int(cfg["trials"]), int(cfg["seed"]))
        rows.append([cfg["variant"], cfg["K"], T, cfg["R"], est.trials, est.failures,
                     _fmt(est.rate), _fmt(est.ci_low), _fmt(est.ci_high), cfg["seed"]])
        log.info("T=%d error=%.4f [%.4f, %.4f]", T, est.rate, est.ci_low, est.ci_high)
    outputs = {"errors.csv": write_csv(out / "errors.csv", ERRORS_HEADER, rows)}
    if cfg.get("transcript") and cfg["variant"] in engine.VARIANTS:
        ccfg = engine.CollabConfig(int(cfg["K"]), Ts[0], int(cfg["R"]), cfg["variant"], float(cfg["se_delta"]))
        res = engine.run(inst, ccfg, SeededRng(int(cfg["seed"]), 0))
        data = res.transcript.to_jsonl().encode()
        (out / "transcript.jsonl").write_bytes(data)
        outputs["transcript.jsonl"] = data
    return {"instance": inst.to_dict(), "outputs": outputs, "extra": {"c_alg": cfg["c_alg"], "T": Ts}}


def do_sweep(cfg: dict, out: Path) -> dict:
    inst = build_instance(cfg)
    R_list = _ints(cfg["R"])
    rows, traces = speedup_table(
        inst, int(cfg["K"]), R_list, float(cfg["target_err"]), int(cfg["trials"]), int(cfg["seed"]),
        rel_tol=float(cfg["rel_tol"]),
    )
    data = write_csv(out / "speedup.csv", SPEEDUP_HEADER, [
        [r.K, r.R, _fmt(r.target_err), r.T_star, r.baseline_T, _fmt(r.empirical_speedup), cfg["seed"]]
        for r in rows
    ])
    trace_rows = []
    for key, tr in traces.items():
        for T, est, ok in tr:
            trace_rows.append([key, T, est.failures, est.trials, _fmt(est.rate), _fmt(est.ci_low), _fmt(est.ci_high), int(ok)])
    tdata = write_csv(out / "search_trace.csv",
                      ["series", "T", "failures", "trials", "rate", "ci_low", "ci_high", "accepted"], trace_rows)
    intervals = {r.R: [r.speedup_low, r.speedup_high] for r in rows}
    return {
        "instance": inst.to_dict(),
        "outputs": {"speedup.csv": data, "search_trace.csv": tdata},
        "extra": {"speedup_definition": SPEEDUP_DEFINITION, "speedup_intervals": intervals},
    }


def do_signid(cfg: dict, out: Path) -> dict:
    delta = float(cfg["delta"])
    est = signid_run(delta, int(cfg["K"]), int(cfg["T"]), int(cfg["R"]), int(cfg["trials"]), int(cfg["seed"]),
                     variant=cfg["variant"])
    data = write_csv(out / "errors.csv", ERRORS_HEADER, [[
        f"signid:{cfg['variant']}", cfg["K"], cfg["T"], cfg["R"], est.trials, est.failures,
        _fmt(est.rate), _fmt(est.ci_low), _fmt(est.ci_high), cfg["seed"],
    ]])
    return {"instance": signid_instance(delta).to_dict(), "outputs": {"errors.csv": data}, "extra": {}}


def do_oracle(cfg: dict, out: Path) -> dict:
    inst = build_instance(cfg)
    sched = tuple(_ints(cfg["schedule"]))
    if len(sched) != 2:
        raise CliUsage("--schedule takes two pull counts, e.g. 2,2")
    exact = exact_error_oracle(inst, sched)
    est = estimate_error(FixedSchedulePolicy(sched), inst, int(cfg["trials"]), int(cfg["seed"]))
    data = write_csv(out / "oracle.csv", ["pulls_0", "pulls_1", "exact_error", "mc_rate", "ci_low", "ci_high", "trials", "seed"],
                     [[sched[0], sched[1], _fmt(exact), _fmt(est.rate), _fmt(est.ci_low), _fmt(est.ci_high), est.trials, cfg["seed"]]])
    print(f"exact error {exact:.6f}; Monte-Carlo {est.rate:.6f} [{est.ci_low:.6f}, {est.ci_high:.6f}]")
    return {"instance": inst.to_dict(), "outputs": {"oracle.csv": data}, "extra": {}}


COMMANDS = {"run": do_run, "sweep": do_sweep, "signid": do_signid, "oracle": do_oracle}


def execute(command: str, cfg: dict, out: Path) -> Path:
    """Run ``command`` with a fully resolved config and write artifacts plus metadata into ``out``."""
    out.mkdir(parents=True, exist_ok=True)
    result = COMMANDS[command](cfg, out)
    meta = {
        "command": command,
        "version": __version__,
        "seed": cfg["seed"],
        "config": cfg,
        "instance": result["instance"],
        "config_hash": _sha256(canonical({"command": command, "config": cfg, "instance": result["instance"]}).encode()),
        "outputs": {name: _sha256(data) for name, data in result["outputs"].items()},
        "jit": _kernels.JIT_ENABLED,
        **result["extra"],
    }
    path = out / "metadata.json"
    path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path


def replay(meta_path: Path, out: Path) -> Path:
    try:
        meta = json.loads(Path(meta_path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CliUsage(f"cannot read metadata {meta_path}: {exc}") from None
    cfg = dict(meta["config"])
    # the instance is pinned inline so the replay does not depend on the original file
    for k in INSTANCE_KEYS:
        cfg.pop(k, None)
    if meta["command"] != "signid":
        cfg["means"] = meta["instance"]["means"]
    return execute(meta["command"], cfg, out)


# ---------------------------------------------------------------- plotting

_PLOT_TEMPLATE = '''"""Plot {kind} data from {csv_name}. Generated by collab-bai; needs matplotlib."""
import csv
import sys
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

CSV = Path(__file__).with_name({csv_name!r})
OUT = Path(sys.argv[1]) if len(sys.argv) > 1 else CSV.with_suffix(".png")

with CSV.open() as fh:
    rows = list(csv.DictReader(fh))

fig, ax = plt.subplots(figsize=(5, 3.5))
if not rows:
    ax.text(0.5, 0.5, "no data", ha="center", va="center", transform=ax.transAxes)
else:
{body}
fig.tight_layout()
fig.savefig(OUT, dpi=150)
print("wrote", OUT)
'''

_SPEEDUP_BODY = '''    xs = [int(r["R"]) for r in rows]
    ys = [float(r["speedup"]) for r in rows]
    ax.plot(xs, ys, "o-")
    ax.set_xlabel("rounds R")
    ax.set_ylabel("empirical speedup")
    ax.set_xticks(xs)'''

_ERRORS_BODY = '''    rows.sort(key=lambda r: int(r["T"]))
    xs = [int(r["T"]) for r in rows]
    ys = [float(r["rate"]) for r in rows]
    lo = [y - float(r["ci_low"]) for y, r in zip(ys, rows)]
    hi = [float(r["ci_high"]) - y for y, r in zip(ys, rows)]
    ax.errorbar(xs, ys, yerr=[lo, hi], fmt="o-", capsize=3)
    ax.set_xscale("log")
    ax.set_xlabel("time horizon T")
    ax.set_ylabel("error rate")'''


def emit_plot_script(csv_path: Path, kind: str | None = None, script_path: Path | None = None) -> Path:
    """Write a standalone matplotlib script next to ``csv_path`` (speedup-vs-R or error-vs-T)."""
    csv_path = Path(csv_path)
    try:
        first = csv_path.read_text().splitlines()[:1]
    except OSError as exc:
        raise CliUsage(f"cannot read {csv_path}: {exc.strerror}") from None
    header = next(csv.reader(first), []) if first else []
    if kind is None:
        kind = "speedup" if header == SPEEDUP_HEADER else "errors"
    expected = SPEEDUP_HEADER if kind == "speedup" else ERRORS_HEADER
    if header and header != expected:
        raise TranscriptError(f"{csv_path.name}: header {header} does not match the {kind} format {expected}")
    body = _SPEEDUP_BODY if kind == "speedup" else _ERRORS_BODY
    script_path = Path(script_path) if script_path else csv_path.with_name(f"plot_{kind}.py")
    script_path.write_text(_PLOT_TEMPLATE.format(kind=kind, csv_name=csv_path.name, body=body))
    return script_path


# ---------------------------------------------------------------- argv

def _add_instance_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("instance source (exactly one)")
    g.add_argument("--instance", help="instance JSON file")
    g.add_argument("--means", help="comma-separated arm means")
    g.add_argument("--gen", choices=["one-spike", "pyramid"], help="generate an instance")
    g.add_argument("--n", type=int, help="arms for --gen")
    g.add_argument("--gap", type=float, help="one-spike gap for --gen")
    g.add_argument("--B", type=int, help="pyramid level ratio")
    g.add_argument("--L", type=int, help="pyramid levels")
    g.add_argument("--best", type=int, help="one-spike best-arm position")
    g.add_argument("--gen-seed", dest="gen_seed", type=int, help="seed of the instance generator")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("-o", "--out", default=None, help="output directory (default: current directory)")
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--show-config", action="store_true", help="print the resolved configuration and exit")
    p.add_argument("--seed", type=int, help="master seed (auto-generated and recorded if omitted)")
    p.add_argument("--trials", type=int)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="collab-bai", description="Collaborative best-arm identification simulator")
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write an instance JSON")
    g.add_argument("kind", choices=["one-spike", "pyramid", "signid", "custom"])
    g.add_argument("--n", type=int)
    g.add_argument("--delta", type=float)
    g.add_argument("--best", type=int, default=0)
    g.add_argument("--B", type=int, default=2)
    g.add_argument("--L", type=int, default=3)
    g.add_argument("--means")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("-o", "--out", required=True, help="output JSON path")

    r = sub.add_parser("run", help="estimate the error of one algorithm")
    _add_common(r)
    _add_instance_flags(r)
    r.add_argument("--variant", choices=list(engine.VARIANTS) + ["se", "sr"])
    r.add_argument("--K", type=int)
    r.add_argument("--T", help="horizon, or comma-separated horizons (default: c_alg formula)")
    r.add_argument("--R", type=int)
    r.add_argument("--delta", type=float, help="confidence of centralized SE")
    r.add_argument("--se-delta", dest="se_delta", type=float)
    r.add_argument("--replication", type=float)
    r.add_argument("--c-alg", dest="c_alg", type=float)
    r.add_argument("--transcript", action="store_const", const=True, help="also export trial 0's transcript")

    s = sub.add_parser("sweep", help="speedup table over round budgets")
    _add_common(s)
    _add_instance_flags(s)
    s.add_argument("--K", type=int)
    s.add_argument("--R", help="comma-separated round budgets")
    s.add_argument("--target-err", dest="target_err", type=float)
    s.add_argument("--rel-tol", dest="rel_tol", type=float)

    si = sub.add_parser("signid", help="SignId via best-arm identification")
    _add_common(si)
    si.add_argument("--delta", type=float)
    si.add_argument("--K", type=int)
    si.add_argument("--T", type=int)
    si.add_argument("--R", type=int)
    si.add_argument("--variant", choices=list(engine.VARIANTS))

    o = sub.add_parser("oracle", help="exact vs Monte-Carlo error of a fixed two-arm schedule")
    _add_common(o)
    _add_instance_flags(o)
    o.add_argument("--schedule", help="pulls of arm 0 and arm 1, e.g. 2,2")

    pl = sub.add_parser("plot", help="emit a plotting script for a CSV")
    pl.add_argument("csv")
    pl.add_argument("--kind", choices=["speedup", "errors"])
    pl.add_argument("-o", "--out", help="script path")

    rp = sub.add_parser("replay", help="re-run from a metadata.json")
    rp.add_argument("metadata")
    rp.add_argument("-o", "--out", required=True)
    return ap


def read_config_file(path: str, command: str) -> dict:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str  # keys such as K and T are case-sensitive
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CliUsage(f"--config: cannot read {path}: {exc.strerror}") from None
    try:
        cp.read_string("[config]\n" + text)
    except configparser.Error as exc:
        raise CliUsage(f"--config: {exc}") from None
    allowed = set(DEFAULTS[command]) | INSTANCE_KEYS
    out = {}
    for key, val in cp["config"].items():
        key = key.replace("-", "_")
        if key not in allowed:
            raise CliUsage(f"--config: unknown key {key!r} for {command}")
        out[key] = val
    return out


def resolve(command: str, args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS[command])
    for k in INSTANCE_KEYS:
        cfg.setdefault(k, None)
    if getattr(args, "config", None):
        cfg.update(read_config_file(args.config, command))
    for k in list(cfg):
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    cfg["transcript"] = bool(cfg.get("transcript")) if command == "run" else cfg.get("transcript")
    if command != "run":
        cfg.pop("transcript", None)
    _coerce(cfg, command)
    if cfg.get("seed") in (None, ""):
        cfg["seed"] = secrets.randbits(63)
    return cfg


def _coerce(cfg: dict, command: str) -> None:
    # values read from a config file arrive as strings
    types = {"K": int, "trials": int, "seed": int, "n": int, "B": int, "L": int, "best": int, "gen_seed": int,
             "delta": float, "gap": float, "se_delta": float, "c_alg": float, "target_err": float,
             "rel_tol": float, "replication": float}
    if command in ("run", "signid"):
        types["R"] = int
    if command == "signid":
        types["T"] = int
    for k, t in types.items():
        v = cfg.get(k)
        if isinstance(v, str) and v.strip() != "":
            try:
                cfg[k] = t(v)
            except ValueError:
                raise CliUsage(f"--{k.replace('_', '-')}: bad value {v!r}") from None
    for k in ("K", "trials", "n"):
        v = cfg.get(k)
        if isinstance(v, int) and v < 1:
            raise CliUsage(f"--{k}: must be a positive integer, got {v}")
    if isinstance(cfg.get("transcript"), str):
        cfg["transcript"] = cfg["transcript"].lower() in ("1", "true", "yes")


def _do_gen(args: argparse.Namespace) -> int:
    if args.kind == "custom":
        if not args.means:
            raise CliUsage("gen custom needs --means")
        inst = gen_custom(_floats(args.means))
    elif args.kind == "one-spike":
        if args.n is None or args.delta is None:
            raise CliUsage("gen one-spike needs --n and --delta")
        inst = gen_one_spike(args.n, args.delta, args.best)
    elif args.kind == "pyramid":
        n = args.n or pyramid_default_n(args.B, args.L)
        inst = gen_pyramid(PyramidParams(args.B, args.L, n), SeededRng(args.seed, 0))
    else:
        if args.delta is None:
            raise CliUsage("gen signid needs --delta")
        inst = gen_signid(args.delta)
    Path(args.out).write_text(inst.to_json() + "\n")
    return 0


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)  # argparse exits 2 on unknown flags
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "gen":
            return _do_gen(args)
        if args.command == "plot":
            print(emit_plot_script(Path(args.csv), args.kind, args.out))
            return 0
        if args.command == "replay":
            print(replay(Path(args.metadata), Path(args.out)))
            return 0
        cfg = resolve(args.command, args)
        if args.show_config:
            print(json.dumps(cfg, indent=2, sort_keys=True))
            return 0
        print(execute(args.command, cfg, Path(args.out or ".")))
        return 0
    except UsageError as exc:
        print(f"collab-bai: error: {exc}", file=sys.stderr)
        return 2
    except (GeneratorError, NotFound, TranscriptError, OSError) as exc:
        print(f"collab-bai: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
