"""Command-line entry point: ``secrecy-regions <subcommand> ...``.

Every output file carries a ``manifest`` describing how it was produced.
Identical manifests and inputs give byte-identical outputs; wall time is
only recorded with ``--record-time`` for that reason.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .channel import (
    AuxiliaryChain, BroadcastWiretapChannel, ParallelChannel, as_parallel, load_channel, marginal_channel,
)
from .errors import (
    CapacityExceeded, DimensionMismatch, EnumerationTooLarge, HypothesisViolated, SecrecyError, ValidationError,
)

EXIT_OK, EXIT_ERROR, EXIT_INVALID, EXIT_HYPOTHESIS = 0, 1, 2, 3
SCALAR_THEOREMS = ("2", "3")
THEOREMS = ("1", "cor1", "2", "3", "4", "no-common", "5", "6")


@dataclass
class RunManifest:
    subcommand: str
    inputs: dict
    config: dict
    seed: int | None = None
    version: str = __version__
    wall_time: float | None = None
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {"tool": "secrecy-regions", "version": self.version, "subcommand": self.subcommand,
               "inputs": self.inputs, "config": self.config, "seed": self.seed}
        if self.wall_time is not None:
            out["wall_time_s"] = self.wall_time
        out.update(self.extra)
        return out


def _input_record(path: str) -> dict:
    with open(path, "rb") as fh:
        digest = hashlib.sha256(fh.read()).hexdigest()
    return {"path": str(path), "sha256": digest}


def jsonable(obj):
    """Plain JSON types only; non-finite floats become null."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):   # enums
        return obj.value
    return obj


def dumps(obj) -> str:
    return json.dumps(jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_atomic(path: str, text: str) -> None:
    """Write through a temporary file in the target directory, then rename."""
    target = os.path.abspath(path)
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=os.path.dirname(target))
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _finish(args, manifest: RunManifest, started: float):
    if getattr(args, "record_time", False):
        manifest.wall_time = round(time.perf_counter() - started, 6)
    return manifest.to_json()


def _subchannel(ch, index: int) -> BroadcastWiretapChannel:
    pc = as_parallel(ch)
    if not 0 <= index < len(pc):
        raise DimensionMismatch(f"sub-channel index {index} out of range for {len(pc)} sub-channels")
    return pc[index]


# ---------------------------------------------------------------------------
# check-order


def cmd_check_order(args) -> int:
    from .orderings import LessNoisyBudget, check_degraded, check_less_noisy

    started = time.perf_counter()
    bc = _subchannel(load_channel(args.channel), args.sub)
    names = [t.strip() for t in args.pair.split(",")]
    if len(names) != 2:
        raise ValidationError(f"--pair takes two terminals such as Y1,Z; got {args.pair!r}")
    a, b = (marginal_channel(bc, t) for t in names)
    budget = LessNoisyBudget(restarts=args.restarts, steps=args.steps, seed=args.seed, strict=args.strict)
    if args.mode == "degraded":
        verdict = check_degraded(a, b)
        config = {"mode": args.mode}
    else:
        verdict = check_less_noisy(a, b, budget)
        config = {"mode": args.mode, "budget": budget.__dict__}
    body = verdict.to_json()
    body["dominant"], body["dominated"] = names
    config.update(pair=names, subchannel=args.sub)
    manifest = RunManifest("check-order", {"channel": _input_record(args.channel)}, config, args.seed)
    text = dumps({"manifest": _finish(args, manifest, started), "verdict": body})
    if args.out:
        write_atomic(args.out, text)
        print(f"{names[0]} vs {names[1]}: {body['relation']}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# compute-region


def _search_config(args):
    from .orderings import LessNoisyBudget
    from .regions import SearchConfig

    return SearchConfig(aux_cardinalities=args.aux_card, num_restarts=args.restarts, grid_resolution=args.grid,
                        ascent_steps=args.steps, seed=args.seed, alpha_steps=args.alpha_steps,
                        num_samples=args.samples, strict=not args.force,
                        order_budget=LessNoisyBudget(restarts=args.order_restarts, steps=args.order_steps,
                                                     seed=args.seed))


def _single(ch) -> BroadcastWiretapChannel:
    if isinstance(ch, ParallelChannel):
        if len(ch) != 1:
            raise DimensionMismatch("this theorem takes a single broadcast channel, not a parallel channel")
        return ch[0]
    return ch


def run_theorem(theorem: str, ch, cfg):
    from . import regions

    if theorem == "1":
        return regions.region_theorem1(_single(ch), cfg)
    if theorem == "cor1":
        return regions.region_corollary1(_single(ch), cfg)
    if theorem == "2":
        return regions.common_message_capacity(ch, cfg)
    if theorem == "3":
        return regions.sum_secrecy_capacity(ch, cfg)
    if theorem == "4":
        return regions.region_theorem4(ch, cfg)
    if theorem == "5":
        return regions.region_theorem5(ch, cfg)
    if theorem == "6":
        return regions.region_theorem6(ch, cfg=cfg)
    if theorem == "no-common":
        return regions.region_no_common(ch, cfg)
    raise ValidationError(f"unknown theorem {theorem!r}")


def cmd_compute_region(args) -> int:
    started = time.perf_counter()
    ch = load_channel(args.channel)
    cfg = _search_config(args)
    result = run_theorem(args.theorem, ch, cfg)
    manifest = RunManifest("compute-region", {"channel": _input_record(args.channel)},
                           {"theorem": args.theorem, "search": cfg.to_json()}, args.seed)
    body = {"manifest": _finish(args, manifest, started), "theorem": args.theorem, "result": result.to_json()}
    if result.formula_only:
        print("warning: hypotheses not met; output is formula-only", file=sys.stderr)
    if args.theorem in SCALAR_THEOREMS:
        print(f"C = {result.value:.10f} bits")
    else:
        pieces = result.region.num_pieces if result.region is not None else 0
        print(f"max sum rate = {result.value:.10f} bits ({pieces} pieces)")
    if args.out:
        write_atomic(args.out, dumps(body))
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate-code


def default_chain(depth: int, size: int, keep: float = 0.8) -> AuxiliaryChain:
    """Uniform root, each later variable copies the previous one with probability ``keep``."""
    link = keep * np.eye(size) + (1 - keep) / size
    return AuxiliaryChain((np.full(size, 1.0 / size),) + (link,) * (depth - 1))


def _load_chains(path: str | None, ch, scheme: str, users: int):
    if path is None:
        if scheme == "superposition":
            return default_chain(users, _single(ch).input_size)
        return tuple(default_chain(2, s.input_size) for s in as_parallel(ch).subchannels)
    with open(path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc})") from None
    if isinstance(obj, dict) and "chains" in obj:
        chains = tuple(AuxiliaryChain.from_json(c) for c in obj["chains"])
        return chains[0] if scheme == "superposition" and len(chains) == 1 else chains
    if isinstance(obj, list):
        return tuple(AuxiliaryChain.from_json(c) for c in obj)
    return AuxiliaryChain.from_json(obj)


def cmd_simulate_code(args) -> int:
    from .codesim import CodebookSpec, build_codebook, equivocation_table, estimate_error

    started = time.perf_counter()
    ch = load_channel(args.channel)
    users = as_parallel(ch).num_receivers
    if len(args.rates) != users + 1:
        raise ValidationError(f"--rates needs {users + 1} values (R0, R1, ..., R{users}), got {len(args.rates)}")
    chain = _load_chains(args.chain, ch, args.scheme, users)
    target = _single(ch) if args.scheme == "superposition" else as_parallel(ch)
    spec = CodebookSpec(n=args.n, message_rates=args.rates, chain=chain, confusion_rates=args.confusion,
                        seed=args.seed, epsilon=args.epsilon, scheme=args.scheme, surface=args.surface,
                        alpha=args.alpha, split=args.split, max_codewords=args.max_codewords)
    cb = build_codebook(spec, target)
    report = estimate_error(cb, None, args.trials, np.random.default_rng([args.seed, 1]))
    if args.exact_equivocation:
        report.equivocation = equivocation_table(cb)
    inputs = {"channel": _input_record(args.channel)}
    if args.chain:
        inputs["chain"] = _input_record(args.chain)
    manifest = RunManifest("simulate-code", inputs, {"codebook": spec.to_json(), "trials": args.trials}, args.seed)
    print(report.table())
    if args.out:
        write_atomic(args.out, dumps({"manifest": _finish(args, manifest, started), "report": report.to_json()}))
    return EXIT_OK


# ---------------------------------------------------------------------------
# fme and export-frontier


def cmd_fme(args) -> int:
    from .geometry import eliminate_all, system_from_json, system_to_json

    started = time.perf_counter()
    with open(args.inp) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{args.inp}: invalid JSON ({exc})") from None
    system = system_from_json(obj)
    variables = [v.strip() for v in args.eliminate.split(",") if v.strip()]
    out = eliminate_all(system, variables, nonnegative=not args.free)
    manifest = RunManifest("fme", {"system": _input_record(args.inp)},
                           {"eliminate": variables, "nonnegative": not args.free})
    body = {"manifest": _finish(args, manifest, started), "system": system_to_json(out),
            "text": [str(s) for s in out]}
    for line in body["text"]:
        print(line)
    if args.out:
        write_atomic(args.out, dumps(body))
    return EXIT_OK


def cmd_export_frontier(args) -> int:
    from .geometry import frontier_csv, region_from_json, weight_grid

    started = time.perf_counter()
    with open(args.inp) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{args.inp}: invalid JSON ({exc})") from None
    region_obj = obj.get("result", obj).get("region", obj) if isinstance(obj, dict) else None
    if not isinstance(region_obj, dict) or "bounds" not in region_obj:
        raise ValidationError(f"{args.inp} holds no region (scalar results have no frontier)")
    region = region_from_json(region_obj)
    W = weight_grid(region.dim, args.resolution)
    manifest = RunManifest("export-frontier", {"region": _input_record(args.inp)}, {"resolution": args.resolution})
    header = "# manifest " + json.dumps(jsonable(_finish(args, manifest, started)), sort_keys=True) + "\n"
    write_atomic(args.out, header + frontier_csv(region, W))
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="secrecy-regions",
                                description="Secrecy capacity regions of multi-receiver wiretap channels.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--record-time", action="store_true", help="store wall time in the manifest")

    sp = sub.add_parser("check-order", help="decide degradedness or less-noisiness of two terminals")
    sp.add_argument("--channel", required=True)
    sp.add_argument("--pair", default="Y1,Z", help="dominant,dominated terminal names (default Y1,Z)")
    sp.add_argument("--mode", choices=("degraded", "less-noisy"), default="degraded")
    sp.add_argument("--sub", type=int, default=0, help="sub-channel index of a parallel channel")
    sp.add_argument("--restarts", type=int, default=200)
    sp.add_argument("--steps", type=int, default=500)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--strict", action="store_true", help="require the strict inequality of the definition")
    sp.add_argument("--out")
    common(sp)
    sp.set_defaults(func=cmd_check_order)

    sp = sub.add_parser("compute-region", help="evaluate a capacity region or scalar capacity")
    sp.add_argument("--theorem", required=True, choices=THEOREMS)
    sp.add_argument("--channel", required=True)
    sp.add_argument("--restarts", type=int, default=8)
    sp.add_argument("--grid", type=int, default=16)
    sp.add_argument("--steps", type=int, default=60, help="ascent steps per restart")
    sp.add_argument("--samples", type=int, default=48, help="random distributions per pool")
    sp.add_argument("--alpha-steps", type=int, default=11)
    sp.add_argument("--aux-card", type=_ints, default=None, help="auxiliary cardinalities, e.g. 2,2")
    sp.add_argument("--order-restarts", type=int, default=40)
    sp.add_argument("--order-steps", type=int, default=80)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--force", action="store_true", help="evaluate even if the ordering hypotheses fail")
    sp.add_argument("--out")
    common(sp)
    sp.set_defaults(func=cmd_compute_region)

    sp = sub.add_parser("simulate-code", help="Monte-Carlo error and exact equivocation of a random code")
    sp.add_argument("--channel", required=True)
    sp.add_argument("--scheme", choices=("superposition", "rate-split", "time-shared"), default="superposition")
    sp.add_argument("--n", type=int, default=8)
    sp.add_argument("--rates", type=_floats, required=True, help="R0,R1,...,RK in bits per channel use")
    sp.add_argument("--confusion", type=_floats, default=None, help="confusion rate per codebook layer")
    sp.add_argument("--chain", help="JSON auxiliary chain(s); default is a symmetric chain")
    sp.add_argument("--trials", type=int, default=10_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--epsilon", type=float, default=0.1)
    sp.add_argument("--surface", type=int, default=3, choices=(1, 2, 3))
    sp.add_argument("--alpha", type=float, default=0.5)
    sp.add_argument("--split", type=float, default=None)
    sp.add_argument("--max-codewords", type=int, default=1 << 22)
    sp.add_argument("--exact-equivocation", action="store_true")
    sp.add_argument("--out")
    common(sp)
    sp.set_defaults(func=cmd_simulate_code)

    sp = sub.add_parser("fme", help="Fourier-Motzkin elimination on a JSON inequality system")
    sp.add_argument("--in", dest="inp", required=True)
    sp.add_argument("--eliminate", required=True, help="comma-separated variables to eliminate")
    sp.add_argument("--free", action="store_true", help="do not assume variables are nonnegative")
    sp.add_argument("--out")
    common(sp)
    sp.set_defaults(func=cmd_fme)

    sp = sub.add_parser("export-frontier", help="CSV of Pareto frontier points of a computed region")
    sp.add_argument("--in", dest="inp", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--resolution", type=int, default=20, help="weight grid resolution")
    common(sp)
    sp.set_defaults(func=cmd_export_frontier)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:        # usage errors and --help
        return int(exc.code or 0)
    try:
        return args.func(args)
    except HypothesisViolated as exc:
        print(f"error: hypothesis violated: {exc} (use --force for formula-only output)", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except (ValidationError, CapacityExceeded, EnumerationTooLarge, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SecrecyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
