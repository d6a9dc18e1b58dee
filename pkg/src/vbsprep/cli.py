"""Command-line front door.

Subcommands mirror the pipeline stages:

* ``recompile``  — optimize the ansatz against the embedding unitary,
  writing params.json,
* ``prepare``    — build and sample the preparation circuit, writing
  counts.json at the requested post-selection stage,
* ``verify``     — compare the noiseless post-selected distribution with the
  MPS oracle,
* ``mitigate``   — invert readout noise on a counts.json file,
* ``report``     — sweep (sites x seeds), score every run, and aggregate.

Exit codes: 0 success, 1 validation/usage error, 2 empty post-selection.
JSON payloads go to --out (or stdout); the human summary goes to stderr.
All floats are serialized with 12 significant digits and runs are seeded, so
re-running a command with identical flags yields byte-identical output.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__, analysis, embedding, prep_pipeline, qcore, recompiler
from .errors import EmptyResultError
from .qcore import BIT_ORDER

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_EMPTY = 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits the process on errors; raise instead so main() can map
    # every failure onto the documented exit codes
    def error(self, message):
        raise _UsageError(message)


def _json_ready(obj):
    if isinstance(obj, float):
        return float(f"{obj:.12g}")
    if isinstance(obj, (np.floating,)):
        return float(f"{float(obj):.12g}")
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _json_ready(obj.tolist())
    if isinstance(obj, dict):
        return {k: _json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_ready(v) for v in obj]
    return obj


def _emit(doc: dict, out_path: str | None) -> None:
    text = json.dumps(_json_ready(doc), indent=2, sort_keys=True) + "\n"
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _say(msg: str) -> None:
    print(msg, file=sys.stderr)


def _stamp(doc: dict, seed: int | None = None) -> dict:
    doc["tool"] = "vbsprep"
    doc["version"] = __version__
    if seed is not None:
        doc["seed"] = seed
    return doc


def _load_json(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _load_params(path: str) -> recompiler.AnsatzParams:
    d = _load_json(path)
    try:
        return recompiler.AnsatzParams(int(d["n_layers"]),
                                       np.asarray(d["angles"], dtype=float))
    except (KeyError, TypeError, ValueError) as exc:
        raise _UsageError(f"bad params file {path}: {exc}") from exc


def _load_noise(spec: str | None, num_qubits: int):
    if spec is None or spec == "none":
        return None
    if spec == "default":
        return prep_pipeline.default_noise_model(num_qubits)
    try:
        return prep_pipeline.NoiseModel.from_dict(_load_json(spec))
    except (KeyError, TypeError, ValueError) as exc:
        raise _UsageError(f"bad noise file {spec}: {exc}") from exc


def _target_unitary(impl: str, params_path: str | None) -> np.ndarray:
    if impl in ("direct", "qr"):
        return embedding.embedded_unitary(impl)
    if params_path is None:
        raise _UsageError("--impl recompiled requires --params")
    return recompiler.ansatz_unitary(_load_params(params_path))


def _prep_config(args) -> prep_pipeline.PrepConfig:
    params = _load_params(args.params) if args.params else None
    noise = _load_noise(getattr(args, "noise", None), 3 * args.sites)
    return prep_pipeline.PrepConfig(
        sites=args.sites,
        boundary=args.boundary,
        projector_impl=args.impl,
        params=params,
        shots=getattr(args, "shots", 1024),
        seed=getattr(args, "seed", 0),
        noise=noise,
    )


# ---------------------------------------------------------------------------
# subcommands

def _cmd_recompile(args) -> int:
    cfg = recompiler.OptimizerConfig(
        max_iterations=args.max_iterations,
        basin_hops=args.hops,
        perturbation_scale=args.scale,
        rounds=args.rounds,
        seed=args.seed,
        loss_tolerance=args.tolerance,
    )
    target = embedding.embedded_unitary(args.target)
    res = recompiler.recompile(target, args.layers, cfg,
                               fidelity_trials=args.trials,
                               threads=args.threads)
    fids = recompiler.random_state_fidelities(
        target, recompiler.ansatz_unitary(res.params), args.trials, args.seed
    )
    doc = _stamp(
        {
            "n_layers": res.params.n_layers,
            "angles": res.params.angles,
            "final_loss": res.final_loss,
            "fidelity_estimate": res.fidelity_estimate,
            "fidelity_min": float(np.min(fids)),
            "iterations_used": res.iterations_used,
            "cx_count": res.cx_count,
        },
        seed=args.seed,
    )
    _emit(doc, args.out)
    _say(
        f"recompile: n_layers={res.params.n_layers} "
        f"loss={res.final_loss:.3e} fidelity={res.fidelity_estimate:.6f} "
        f"cx={res.cx_count} iterations={res.iterations_used}"
    )
    return EXIT_OK


def _cmd_prepare(args) -> int:
    cfg = _prep_config(args)
    raw = prep_pipeline.run_shots(cfg)
    code = EXIT_OK
    counts = raw
    try:
        if args.stage in ("ancilla", "conserved"):
            counts = prep_pipeline.postselect_ancilla(raw, cfg.sites)
        if args.stage == "conserved":
            counts = prep_pipeline.postselect_conserved(
                counts, cfg.sites, cfg.boundary
            )
    except EmptyResultError as exc:
        _say(f"prepare: empty result — {exc}")
        counts = prep_pipeline.ShotCounts(
            2 * cfg.sites, raw.shots, {}, stage=args.stage, meta=raw.meta
        )
        code = EXIT_EMPTY
    doc = _stamp(
        {
            "num_qubits": counts.num_qubits,
            "shots": counts.shots,
            "bit_order": BIT_ORDER,
            "stage": counts.stage if code == EXIT_OK else args.stage,
            "counts": dict(sorted(counts.counts.items())),
            "survivors": counts.total(),
            "noise": cfg.noise.to_dict() if cfg.noise else None,
        },
        seed=cfg.seed,
    )
    _emit(doc, args.out)
    _say(
        f"prepare: sites={cfg.sites} {cfg.boundary} impl={cfg.projector_impl} "
        f"shots={cfg.shots} stage={args.stage} survivors={counts.total()}"
    )
    return code


def _cmd_verify(args) -> int:
    cfg = _prep_config(args)
    state = prep_pipeline.run_noiseless(cfg)
    projected, success = prep_pipeline.project_ancillas(state, cfg.sites)
    probs = projected.probabilities()
    simulated = {
        qcore.index_to_bitstring(i, 2 * cfg.sites): float(p)
        for i, p in enumerate(probs)
        if p > 1e-16
    }
    oracle = analysis.oracle_distribution(cfg.sites, cfg.boundary).probs
    keys = set(simulated) | set(oracle)
    diff = max(abs(simulated.get(k, 0.0) - oracle.get(k, 0.0)) for k in keys)
    ok = diff < args.tolerance
    doc = _stamp(
        {
            "sites": cfg.sites,
            "boundary": cfg.boundary,
            "impl": cfg.projector_impl,
            "bit_order": BIT_ORDER,
            "max_norm_diff": diff,
            "tolerance": args.tolerance,
            "success_probability": success,
            "ok": ok,
            "oracle": dict(sorted(oracle.items())),
            "simulated": dict(sorted(simulated.items())),
        },
        seed=cfg.seed,
    )
    _emit(doc, args.out)
    if args.dump_oracle:
        _emit(
            _stamp({"sites": cfg.sites, "boundary": cfg.boundary,
                    "bit_order": BIT_ORDER,
                    "distribution": dict(sorted(oracle.items()))}),
            args.dump_oracle,
        )
    if args.dump_unitary:
        u = _target_unitary(cfg.projector_impl, args.params)
        _emit(
            _stamp({
                "impl": cfg.projector_impl,
                "order": "row-major, entries as [re, im]; first block qubit "
                         "(the ancilla) is the most significant bit",
                "matrix": [[[float(z.real), float(z.imag)] for z in row]
                           for row in u],
            }),
            args.dump_unitary,
        )
    _say(
        f"verify: sites={cfg.sites} {cfg.boundary} impl={cfg.projector_impl} "
        f"max_norm_diff={diff:.3e} -> {'ok' if ok else 'MISMATCH'}"
    )
    return EXIT_OK if ok else EXIT_USAGE


def _cmd_mitigate(args) -> int:
    d = _load_json(args.counts)
    try:
        counts = prep_pipeline.ShotCounts(
            int(d["num_qubits"]), int(d["shots"]),
            {k: int(v) for k, v in d["counts"].items()},
            stage=d.get("stage", "raw"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise _UsageError(f"bad counts file {args.counts}: {exc}") from exc
    cal_doc = _load_json(args.calibration)
    if "flip_probs" in cal_doc:
        cal = analysis.ReadoutCalibration.from_flip_probs(cal_doc["flip_probs"])
    elif "matrices" in cal_doc:
        cal = analysis.ReadoutCalibration(
            [np.asarray(m, dtype=float) for m in cal_doc["matrices"]]
        )
    else:
        raise _UsageError(
            f"{args.calibration} needs 'flip_probs' or 'matrices'"
        )
    dist = analysis.mitigate(counts, cal)
    doc = _stamp(
        {
            "num_qubits": dist.num_qubits,
            "bit_order": BIT_ORDER,
            "stage": counts.stage,
            "distribution": dict(sorted(dist.probs.items())),
        }
    )
    _emit(doc, args.out)
    _say(f"mitigate: {len(counts.counts)} -> {len(dist.probs)} strings")
    return EXIT_OK


def _cmd_report(args) -> int:
    sites = [int(s) for s in args.sites.split(",") if s]
    if not sites:
        raise _UsageError("--sites needs a comma-separated list, e.g. 2,3,4,5")
    params = _load_params(args.params) if args.params else None
    records = []
    for L in sites:
        noise = _load_noise(args.noise, 3 * L)
        for k in range(args.seeds):
            cfg = prep_pipeline.PrepConfig(
                sites=L,
                boundary=args.boundary,
                projector_impl=args.impl,
                params=params,
                shots=args.shots,
                seed=args.seed + k,
                noise=noise,
            )
            records.append(
                analysis.score_run(cfg, mitigated=not args.no_mitigation,
                                   include_energy=not args.no_energy)
            )
    doc = _stamp(analysis.report(records), seed=args.seed)
    _emit(doc, args.out)
    if args.csv:
        analysis.write_report_csv(records, args.csv)
    for s in doc["series"]:
        mean = s.get("hellinger_unmitigated_mean")
        mit = s.get("hellinger_mitigated_mean")
        _say(
            f"report: L={s['L']} {s['boundary']} {s['impl']} runs={s['runs']} "
            f"hellinger={'n/a' if mean is None else f'{mean:.4f}'}"
            + ("" if mit is None else f" mitigated={mit:.4f}")
        )
    return EXIT_OK


# ---------------------------------------------------------------------------

def _build_parser() -> _Parser:
    p = _Parser(prog="vbsprep", description=__doc__.split("\n\n")[0])
    p.add_argument("--threads", type=int,
                   default=int(os.environ.get("VBS_THREADS", "1")),
                   help="cap on internal parallelism (env: VBS_THREADS)")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("recompile", help="optimize the projector-block ansatz")
    r.add_argument("--layers", type=int, default=8)
    r.add_argument("--rounds", type=int, default=20)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--hops", type=int, default=20)
    r.add_argument("--max-iterations", type=int, default=600)
    r.add_argument("--scale", type=float, default=0.3)
    r.add_argument("--tolerance", type=float, default=1e-6)
    r.add_argument("--trials", type=int, default=200,
                   help="random states for fidelity certification")
    r.add_argument("--target", choices=("direct", "qr"), default="direct")
    r.add_argument("--out", default=None)
    r.set_defaults(func=_cmd_recompile)

    def add_prep_flags(q, shots=True):
        q.add_argument("--sites", type=int, default=2)
        q.add_argument("--boundary", choices=("obc", "pbc"), default="obc")
        q.add_argument("--impl", choices=prep_pipeline.PROJECTOR_IMPLS,
                       default="direct")
        q.add_argument("--params", default=None,
                       help="params.json from `recompile`")
        if shots:
            q.add_argument("--shots", type=int, default=1024)
            q.add_argument("--seed", type=int, default=0)
            q.add_argument("--noise", default=None,
                           help="noise.json, or 'default', or 'none'")

    pr = sub.add_parser("prepare", help="sample the preparation circuit")
    add_prep_flags(pr)
    pr.add_argument("--stage", choices=("raw", "ancilla", "conserved"),
                    default="conserved")
    pr.add_argument("--out", default=None)
    pr.set_defaults(func=_cmd_prepare)

    v = sub.add_parser("verify", help="check the simulator against the oracle")
    add_prep_flags(v, shots=False)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--tolerance", type=float, default=1e-10)
    v.add_argument("--dump-oracle", default=None)
    v.add_argument("--dump-unitary", default=None)
    v.add_argument("--out", default=None)
    v.set_defaults(func=_cmd_verify)

    m = sub.add_parser("mitigate", help="invert readout noise on counts.json")
    m.add_argument("--counts", required=True)
    m.add_argument("--calibration", required=True,
                   help="JSON with 'flip_probs' or 'matrices'")
    m.add_argument("--out", default=None)
    m.set_defaults(func=_cmd_mitigate)

    rp = sub.add_parser("report", help="sweep runs and aggregate scores")
    rp.add_argument("--sites", default="2,3,4,5")
    rp.add_argument("--boundary", choices=("obc", "pbc"), default="obc")
    rp.add_argument("--impl", choices=prep_pipeline.PROJECTOR_IMPLS,
                    default="direct")
    rp.add_argument("--params", default=None)
    rp.add_argument("--shots", type=int, default=8192)
    rp.add_argument("--seeds", type=int, default=20,
                    help="number of seeds per L (seed, seed+1, ...)")
    rp.add_argument("--seed", type=int, default=0, help="first seed")
    rp.add_argument("--noise", default=None)
    rp.add_argument("--no-mitigation", action="store_true")
    rp.add_argument("--no-energy", action="store_true")
    rp.add_argument("--csv", default=None)
    rp.add_argument("--out", default=None)
    rp.set_defaults(func=_cmd_report)
    return p


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        _say(f"error: {exc}")
        return EXIT_USAGE
    except EmptyResultError as exc:
        _say(f"empty result: {exc}")
        return EXIT_EMPTY
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        _say(f"error: {exc}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
