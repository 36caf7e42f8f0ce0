"""Command-line front end.

Every command reads an optional JSON config (``--config``); flags override
config keys. Sampling commands require a seed. Outputs are deterministic for
a given config; run metadata with timestamps goes to ``<output>.log``.

Exit codes: 0 pass, 2 numerical-check failure, 3 usage, 4 I/O.
"""
import argparse
import copy
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import accel
from . import io as pio
from .fields import (
    Grid,
    GridField,
    GaussPoly,
    GaussPolyField,
    bump_lambda,
    gauss_scalar,
    lambda_identity_field,
    potential_field,
    quadratic_lambda,
    random_gausspoly_field,
    random_vector_gausspoly,
)
from .geometry import BallDomain, sample_inward_boundary

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_IO = 0, 2, 3, 4
PINNED_INVERSION_BASELINE = 0.040

DEFAULTS = {
    "n": 3,
    "domain": {"center": [0.0, 0.0, 0.0], "radius": 1.0},
    "field": {"family": "gauss-poly", "degree": 2, "a": 1.0, "scale": 1.0, "epsilon": 1.0,
              "symmetric": True, "real": True, "lambda": "bump"},
    "rays": {"count": 1000},
    "segments": 1024,
    "grid": {"nodes": 33, "half_width": 1.0},
    "moments": {"order": 1, "nodes": 129},
    "forms": {"order": 8},
    "inversion": {"nodes": 24, "lam_rel": 1e-2, "lam_rel_grid": [1e-3, 1e-2, 1e-1], "class": "real-symmetric",
                  "sweep": False, "baseline": PINNED_INVERSION_BASELINE},
    "threads": 1,
}

SEEDED_FAMILIES = {"gauss-poly", "kernel-v"}
SAMPLING_COMMANDS = {"forward", "linear-forward", "sdata", "kernel-check"}


class UsageError(Exception):
    pass


class CheckFailed(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# config handling

def _merge(base, extra):
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _set(cfg, dotted, value):
    keys = dotted.split(".")
    node = cfg
    for k in keys[:-1]:
        node = node.setdefault(k, {})
    node[keys[-1]] = value


def load_config(args):
    cfg = copy.deepcopy(DEFAULTS)
    if args.config:
        try:
            with open(args.config) as fh:
                user = json.load(fh)
        except json.JSONDecodeError as exc:
            raise UsageError(f"config {args.config}: {exc}") from exc
        if not isinstance(user, dict):
            raise UsageError("config must be a JSON object")
        cfg = _merge(cfg, user)
    for dest, dotted in _FLAG_KEYS.items():
        v = getattr(args, dest, None)
        if v is not None:
            _set(cfg, dotted, v)
    cfg["command"] = args.command
    return cfg


def _need_seed(cfg):
    fam = cfg["field"].get("family")
    needs = cfg["command"] in SAMPLING_COMMANDS
    needs |= cfg["command"] in ("gen-field", "forward", "linear-forward", "sdata", "kernel-check", "moments",
                                "decompose") and "file" not in cfg["field"] and fam in SEEDED_FAMILIES
    needs |= cfg["command"] == "invert" and not (cfg.get("phi1") and cfg.get("phi2"))
    if needs and cfg.get("seed") is None:
        raise UsageError(f"command {cfg['command']!r} samples random data: --seed is mandatory")
    return cfg.get("seed")


# ---------------------------------------------------------------------------
# field families

def _lambda(spec):
    kind = spec.get("lambda", "bump")
    if kind == "bump":
        return bump_lambda()
    if kind == "quadratic":
        return quadratic_lambda()
    if kind == "gauss":
        return gauss_scalar(float(spec.get("a", 1.0)))
    raise UsageError(f"unknown lambda {kind!r} (bump, quadratic, gauss)")


def make_field(spec, seed=None, n=3):
    """Analytic field from a family config, or a PTF1 grid field from ``spec["file"]``."""
    if n != 3:
        raise UsageError("field families are defined for n = 3")
    if "file" in spec and spec["file"]:
        return pio.read_grid_field(spec["file"])
    fam = spec.get("family")
    eps = float(spec.get("epsilon", 1.0))
    try:
        if fam == "gauss-poly":
            f = random_gausspoly_field(
                np.random.default_rng(seed), degree=int(spec.get("degree", 2)), a=float(spec.get("a", 1.0)),
                symmetric=bool(spec.get("symmetric", True)), real=bool(spec.get("real", True)),
                scale=float(spec.get("scale", 1.0)),
            )
        elif fam == "lambda-E":
            f = lambda_identity_field(_lambda(spec))
        elif fam == "potential":
            f = potential_field(_lambda(spec))
        elif fam == "kernel-v":
            from .saintvenant import kernel_field_from_potential

            v = random_vector_gausspoly(np.random.default_rng(seed), degree=int(spec.get("degree", 2)),
                                        a=float(spec.get("a", 1.0)), scale=float(spec.get("scale", 1.0)))
            f = kernel_field_from_potential(v)
        elif fam == "zero":
            f = GaussPolyField(GaussPoly.zeros((3, 3), 0, a=0.0), "symmetric", "zero", support_radius=1.0,
                               validate=False)
        else:
            raise UsageError(f"unknown field family {fam!r}")
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid parameters for family {fam!r}: {exc}") from exc
    if eps != 1.0:
        f = f.scaled(eps)
        f.name = f"{eps:g}*{fam}"
    else:
        f.name = fam
    return f


def _domain(cfg):
    d = cfg["domain"]
    return BallDomain(tuple(float(v) for v in d["center"]), float(d["radius"]))


def _rays(cfg, seed):
    count = int(cfg["rays"]["count"])
    if count < 1:
        raise UsageError("ray count must be >= 1")
    return sample_inward_boundary(_domain(cfg), count, seed)


def _step(cfg):
    seg = int(cfg["segments"])
    if seg < 2:
        raise UsageError("segments must be >= 2")
    return 2.0 * float(cfg["domain"]["radius"]) / seg


def _grid(cfg, key="grid"):
    g = cfg[key]
    return Grid.cube(float(g.get("half_width", 1.0)), int(g["nodes"]))


# ---------------------------------------------------------------------------
# commands

def cmd_gen_field(cfg, seed):
    f = make_field(cfg["field"], seed, cfg["n"])
    gf = GridField.sample(f, _grid(cfg))
    return {"output": lambda p: pio.write_grid_field(p, gf)}, {"field": f.name, "symmetry": gf.symmetry}


def cmd_forward(cfg, seed):
    from .transport import forward_data

    f = make_field(cfg["field"], seed, cfg["n"])
    data = forward_data(f, _rays(cfg, seed), _step(cfg))
    if data.failed.all():
        raise CheckFailed("every ray failed")
    text = data.dumps().encode()
    return {"output": lambda p: _write_bytes(p, text)}, {"failed_rays": int(data.failed.sum())}


def cmd_linear_forward(cfg, seed):
    from .transport import linear_forward_data

    f = make_field(cfg["field"], seed, cfg["n"])
    data = linear_forward_data(f, _rays(cfg, seed), step=_step(cfg))
    text = data.dumps().encode()
    return {"output": lambda p: _write_bytes(p, text)}, {"rays": len(data)}


def cmd_sdata(cfg, seed):
    from .transport import s_data_batch

    f = make_field(cfg["field"], seed, cfg["n"])
    rays = _rays(cfg, seed)
    vals = s_data_batch(f, rays, _step(cfg))
    meta = {"kind": "S", "field": f.name}
    return {"output": lambda p: pio.write_scalar_data(p, rays, vals, meta)}, {"rays": len(rays)}


def cmd_kernel_check(cfg, seed):
    from .saintvenant import kernel_check

    f = make_field(cfg["field"], seed, cfg["n"])
    if not isinstance(f, GaussPolyField):
        raise UsageError("kernel-check needs an analytic field family (exact second derivatives)")
    if f.symmetry != "symmetric":
        raise UsageError("kernel-check is defined for symmetric fields")
    rep = kernel_check(f, seed)
    rep["field"] = f.name
    expect = cfg.get("expect")
    status = rep["consistent"] and (expect is None or rep["verdict"] == expect)
    rep["expect"] = expect
    rep["pass"] = bool(status)
    return {"output": lambda p: pio.write_report(p, rep)}, rep


def cmd_moments(cfg, seed):
    from .moments import first_order_combos, kernel_moment_fit, moment_scale, moments

    f = make_field(cfg["field"], seed, cfg["n"])
    m = int(cfg["moments"]["order"])
    if m < 0:
        raise UsageError("moment order must be >= 0")
    table = moments(f, m, nodes=int(cfg["moments"]["nodes"]))
    scale = moment_scale(f, m)
    rep = {"field": f.name, "order": m, "scale": scale, "max_abs": float(np.max(np.abs(table.array())))}
    if m == 1:
        combos = first_order_combos(table=table)
        fit = kernel_moment_fit(f, table=table)
        rep.update(combos=[complex(c) for c in combos], combos_max=float(np.max(np.abs(combos))),
                   fit_a=[complex(a) for a in fit.a], fit_residual=fit.residual,
                   fit_zero_entries=[complex(z) for z in fit.zero_entries], fit_applicable=fit.applicable)
    outputs = {"output": lambda p: _write_moments(p, table)}
    if cfg.get("report"):
        outputs["report"] = lambda p: pio.write_report(p, rep)
    return outputs, rep


def cmd_decompose(cfg, seed):
    from .decomp3d import decompose, discrete_closedness

    f = make_field(cfg["field"], seed, cfg["n"])
    grid = _grid(cfg)
    domain = _domain(cfg)
    lam, closed = decompose(f, grid, domain)
    lam2, _ = decompose(closed, grid, domain)
    scale = float(np.max(np.abs(f(grid.points()))))
    rep = {
        "field": f.name,
        "grid_nodes": list(grid.dims),
        "lambda_max": float(np.max(np.abs(lam.values))),
        "closedness_before": float(np.max(np.abs(discrete_closedness(f, grid, domain)), initial=0.0)),
        "closedness_after": float(np.max(np.abs(discrete_closedness(closed, grid, domain)), initial=0.0)),
        "idempotence_lambda_max": float(np.max(np.abs(lam2.values))),
        "field_scale": scale,
        "idempotence_tolerance": 1e-6,
    }
    rep["pass"] = rep["idempotence_lambda_max"] <= 1e-6 * max(scale, 1e-300) or scale == 0.0
    outputs = {"output": lambda p: pio.write_report(p, rep)}
    if cfg.get("closed_output"):
        gf = GridField.sample(closed, grid, name="closed")
        outputs["closed_output"] = lambda p: pio.write_grid_field(p, gf)
    return outputs, rep


def cmd_forms(cfg, seed):
    from .forms import forms_report
    from .geometry import sphere_quadrature

    n = int(cfg["n"])
    if n not in (3, 4):
        raise UsageError("forms are tabulated for n = 3 and n = 4")
    quad = sphere_quadrature(n, "product", int(cfg["forms"]["order"]))
    rep = forms_report(n, quad)
    return {"output": lambda p: pio.write_report(p, rep)}, rep


def cmd_invert(cfg, seed):
    from .inversion import InversionConfig, reconstruct_nonlinear
    from .transport import BoundaryDataSet, forward_data

    inv = cfg["inversion"]
    icfg = InversionConfig(nodes=int(inv["nodes"]), segments=int(cfg["segments"]), cls=inv["class"],
                           lam_rel=float(inv["lam_rel"]), lam_rel_grid=tuple(inv["lam_rel_grid"]),
                           sweep=bool(inv["sweep"]))
    truth = None
    if cfg.get("phi1") and cfg.get("phi2"):
        phi1 = BoundaryDataSet.read(cfg["phi1"])
        phi2 = BoundaryDataSet.read(cfg["phi2"])
        if cfg["field"].get("compare"):
            truth = make_field(cfg["field"], seed, cfg["n"])
    else:
        f2 = make_field(cfg["field"], seed, cfg["n"])
        rays = _rays(cfg, seed)
        phi2 = forward_data(f2, rays, _step(cfg))
        if cfg.get("field1"):
            f1 = make_field(_merge(DEFAULTS["field"], cfg["field1"]), seed, cfg["n"])
            phi1 = forward_data(f1, rays, _step(cfg))
            truth = _Difference(f2, f1)
        else:
            phi1 = BoundaryDataSet(rays, np.broadcast_to(np.eye(3), (len(rays), 3, 3)).astype(complex),
                                   {"field": "zero"})
            truth = f2
    res = reconstruct_nonlinear(phi1, phi2, icfg, truth=truth, domain=_domain(cfg))
    rep = res.summary()
    if truth is not None:
        rep["baseline"] = float(inv["baseline"])
        rep["pass"] = rep["closed_error"] <= rep["baseline"]
    else:
        rep["pass"] = bool(res.converged)
    outputs = {"output": lambda p: pio.write_grid_field(p, res.field)}
    if cfg.get("report"):
        outputs["report"] = lambda p: pio.write_report(p, rep)
    return outputs, rep


class _Difference:
    def __init__(self, a, b):
        self.a, self.b = a, b
        self.n = a.n
        self.symmetry = a.symmetry if a.symmetry == b.symmetry else "general"
        self.support_radius = max(a.support_radius, b.support_radius)
        self.name = f"{a.name}-{b.name}"

    def __call__(self, x):
        return self.a(x) - self.b(x)


COMMANDS = {
    "gen-field": cmd_gen_field,
    "forward": cmd_forward,
    "linear-forward": cmd_linear_forward,
    "sdata": cmd_sdata,
    "kernel-check": cmd_kernel_check,
    "moments": cmd_moments,
    "decompose": cmd_decompose,
    "forms": cmd_forms,
    "invert": cmd_invert,
}


def _write_bytes(path, data):
    with open(path, "wb") as fh:
        fh.write(data)
    return pio.sha256_bytes(data)


def _write_moments(path, table):
    table.write_csv(path)
    return pio.sha256_file(path)


# ---------------------------------------------------------------------------
# argument parsing

_FLAG_KEYS = {
    "n": "n",
    "family": "field.family",
    "degree": "field.degree",
    "a": "field.a",
    "scale": "field.scale",
    "epsilon": "field.epsilon",
    "lam_kind": "field.lambda",
    "field_file": "field.file",
    "rays": "rays.count",
    "seed": "seed",
    "segments": "segments",
    "nodes": "grid.nodes",
    "half_width": "grid.half_width",
    "order": "moments.order",
    "quad_order": "forms.order",
    "inv_nodes": "inversion.nodes",
    "lam_rel": "inversion.lam_rel",
    "sym_class": "inversion.class",
    "baseline": "inversion.baseline",
    "sweep": "inversion.sweep",
    "phi1": "phi1",
    "phi2": "phi2",
    "expect": "expect",
    "output": "output",
    "report": "report",
    "closed_output": "closed_output",
    "threads": "threads",
}


def build_parser():
    p = _Parser(prog="poltomo", description="Polarization tomography toolkit.")
    p.add_argument("--config", help="JSON config document")
    p.add_argument("--threads", type=int, help="cap on worker threads")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", dest="config_sub", help="JSON config document")
        s.add_argument("--seed", type=int)
        s.add_argument("--n", type=int)
        s.add_argument("-o", "--output")
        s.add_argument("--threads", dest="threads_sub", type=int)
        if name in ("gen-field", "forward", "linear-forward", "sdata", "kernel-check", "moments", "decompose", "invert"):
            s.add_argument("--family", choices=["gauss-poly", "lambda-E", "potential", "kernel-v", "zero"])
            s.add_argument("--degree", type=int)
            s.add_argument("--a", type=float)
            s.add_argument("--scale", type=float)
            s.add_argument("--epsilon", type=float)
            s.add_argument("--lambda", dest="lam_kind", choices=["bump", "quadratic", "gauss"])
            s.add_argument("--field-file")
        if name in ("forward", "linear-forward", "sdata", "invert"):
            s.add_argument("--rays", type=int)
            s.add_argument("--segments", type=int)
        if name in ("gen-field", "decompose"):
            s.add_argument("--nodes", type=int)
            s.add_argument("--half-width", type=float)
        if name == "decompose":
            s.add_argument("--closed-output")
        if name == "moments":
            s.add_argument("--order", type=int)
            s.add_argument("--report")
        if name == "forms":
            s.add_argument("--quad-order", type=int)
        if name == "kernel-check":
            s.add_argument("--expect", choices=["in-kernel", "not-in-kernel"])
        if name == "invert":
            s.add_argument("--phi1")
            s.add_argument("--phi2")
            s.add_argument("--inv-nodes", type=int)
            s.add_argument("--lam-rel", type=float)
            s.add_argument("--class", dest="sym_class", choices=["real-symmetric", "skew-hermitian", "general"])
            s.add_argument("--baseline", type=float)
            s.add_argument("--sweep", action="store_true", default=None)
            s.add_argument("--report")
    return p


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    t0 = time.time()
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UsageError("a command is required: " + ", ".join(COMMANDS))
        args.config = getattr(args, "config_sub", None) or args.config
        args.threads = getattr(args, "threads_sub", None) or args.threads
        cfg = load_config(args)
        if int(cfg["threads"]) < 1:
            raise UsageError("--threads must be >= 1")
        accel.set_threads(int(cfg["threads"]))
        seed = _need_seed(cfg)
        if not cfg.get("output"):
            raise UsageError("an output path is required (-o/--output or config key 'output')")
        outputs, rep = COMMANDS[args.command](cfg, seed)
        sums = {}
        for key, writer in outputs.items():
            path = cfg[key] if key != "output" else cfg["output"]
            sums[path] = writer(path)
            print(f"sha256 {sums[path]}  {path}")
        _sidecar(cfg, argv, sums, time.time() - t0)
        if isinstance(rep, dict) and rep.get("pass") is False:
            print("check failed", file=sys.stderr)
            return EXIT_CHECK
        return EXIT_OK
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CheckFailed as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except (OSError, pio.FormatError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


def _sidecar(cfg, argv, sums, elapsed):
    log = {
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "elapsed_s": round(elapsed, 3),
        "argv": list(argv),
        "config": cfg,
        "backend": accel.BACKEND,
        "checksums": sums,
    }
    Path(str(cfg["output"]) + ".log").write_text(json.dumps(pio._clean(log), indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    sys.exit(main())
