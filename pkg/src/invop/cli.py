"""Command-line harness for the inverse-problem experiments.

Subcommands
-----------
generate   sample a training set of coefficient/data pairs and save it
build      orthonormalize a saved training set and assemble the sigmoid
           surrogate, saving its coefficients
solve      run one regularized inversion and emit a CSV record
study      run a convergence-rate study and emit its CSV table
verify     run fast invariant checks and print one line per group

Global flags: ``--config PATH``, ``--seed INT``, ``--out PATH``, ``--quiet``.
Exit codes: 0 success, 1 invalid configuration or usage, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import serialize
from .config import (
    load_config,
    perturbation_from_section,
    problem_from_name,
    study_config,
)
from .errors import ConfigInvalid, InvopError
from .fem import ProblemKind, ProblemTag, solve_forward_fem, solve_forward_reference
from .grid import GridFunction, SpaceKind, norm
from .mollify import mollify
from .neural import ActivationKind
from .studies import RateTable, StudyConfig, analytic_cases, fem_rho, run_study
from .tikhonov import (
    RUN_COLUMNS,
    SurrogateHandle,
    TikhonovConfig,
    add_noise,
    choose_parameters,
    solve_inverse_problem,
    tikhonov_value,
    tikhonov_value_and_gradient,
)
from .training import (
    assemble_neural_surrogate,
    build_linear_surrogate,
    center_training_set,
    generate_training_set,
)


def _say(args, text):
    if not args.quiet:
        print(text)


def _require(args, flag):
    val = getattr(args, flag)
    if val is None:
        raise ConfigInvalid(f"subcommand {args.command!r} requires --{flag}")
    return val


# ---------------------------------------------------------------------------
# subcommands


def _cmd_generate(args) -> int:
    cfg = load_config(_require(args, "config"))
    sec = cfg.get("generate", {})
    prob = problem_from_name(sec.get("problem", "a"))
    n = int(sec.get("n_cells", 256))
    f = GridFunction.constant(float(sec.get("load", 1.0)), n)
    x0 = GridFunction.constant(float(sec.get("center", 1.0)), n)
    spec = perturbation_from_section(cfg.get("perturbation", {}), seed=args.seed)
    ts = generate_training_set(prob, f, x0, spec)
    out = _require(args, "out")
    serialize.save_training_set(out, ts)
    _say(args, f"wrote training set with {ts.n_train} pairs to {out}")
    return 0


def _cmd_build(args) -> int:
    cfg = load_config(_require(args, "config"))
    sec = cfg.get("build", {})
    if "training" not in sec:
        raise ConfigInvalid("[build] needs training = <path to training set>")
    ts = serialize.load_training_set(str(sec["training"]))
    ls = build_linear_surrogate(center_training_set(ts))
    seed = args.seed if args.seed is not None else int(sec.get("seed", 1))
    coeffs, diag = assemble_neural_surrogate(
        ls,
        int(sec.get("n_quad", 512)),
        int(sec.get("n_trunk", 14)),
        ActivationKind(str(sec.get("activation", "logistic"))),
        seed=seed,
    )
    out = _require(args, "out")
    serialize.save_structured(out, coeffs)
    serialize.save_linear_surrogate(str(out) + ".rank", ls)
    _say(args, f"wrote surrogate ({coeffs.n_terms} terms, "
               f"trunk residual {diag.r_N:.3e}) to {out}")
    return 0


def _cmd_solve(args) -> int:
    cfg = load_config(_require(args, "config"))
    sec = cfg.get("solve", {})
    prob = problem_from_name(sec.get("problem", "a"))
    n = int(sec.get("n_cells", 256))
    f = GridFunction.constant(float(sec.get("load", 1.0)), n)
    x0 = GridFunction.constant(float(sec.get("center", 1.0)), n)
    delta = float(sec.get("delta", 1e-3))
    xi = float(sec.get("xi", 0.0))
    seed = args.seed if args.seed is not None else int(sec.get("seed", 0))

    kind = str(sec.get("surrogate", "fem"))
    if kind == "fem":
        h = SurrogateHandle.fem(prob, f, n)
        rho = fem_rho(prob, n)
    elif kind in ("rank", "neural"):
        if "surrogate_file" not in sec:
            raise ConfigInvalid(f"[solve] surrogate={kind} needs surrogate_file")
        base = str(sec["surrogate_file"])
        ls = serialize.load_linear_surrogate(base + ".rank")
        if kind == "rank":
            h, rho = SurrogateHandle.rank(ls), 0.0
        else:
            h, rho = SurrogateHandle.neural(serialize.load_structured(base), ls.center), 0.0
    else:
        raise ConfigInvalid(f"unknown surrogate {kind!r}")

    space = prob.image_space if kind != "fem" else SpaceKind.H1
    space = SpaceKind(str(sec.get("space", space.value)))
    target = str(sec.get("target", "source"))
    if target == "source":
        from .studies import _source_target_a
        xt = _source_target_a(prob, x0, f, n)
    elif target == "prior":
        xt = x0
    else:
        raise ConfigInvalid("target must be 'source' or 'prior'")
    y = solve_forward_reference(prob, xt, f)
    yd = add_noise(y, delta, seed)
    alpha, eta = choose_parameters(delta, rho, float(sec.get("constant", 1.0)))
    tik = TikhonovConfig(
        alpha=alpha, delta=delta, eta=eta, xi=xi, x0=x0, space=space, nu=prob.nu,
        max_iterations=int(sec.get("max_iterations", 4000)), x_true=xt,
    )
    run = solve_inverse_problem(h, yd, tik, x0, seed=seed,
                                problem_label=str(sec.get("problem", "a")))
    lines = [",".join(RUN_COLUMNS), run.csv_row()]
    if args.out:
        with open(args.out, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    _say(args, lines[0])
    _say(args, lines[1])
    return 0


def _cmd_study(args) -> int:
    cfg = load_config(_require(args, "config"))
    table = run_study(study_config(cfg, seed=args.seed, out=args.out))
    _say(args, f"fitted slope {table.fitted_slope:.6g} "
               f"(stderr {table.slope_stderr:.2g}, {len(table.rows)} rows)")
    return 0


# ---------------------------------------------------------------------------
# verify


def _verify_groups():
    n = 64
    prob_a = ProblemKind(ProblemTag.A_EXAMPLE)

    def grp_discretization():
        label, prob, x, f, y_exact = analytic_cases()[0]
        err = norm(
            solve_forward_fem(prob, GridFunction.from_callable(x, n),
                              GridFunction.from_callable(f, n), n)
            - GridFunction.from_callable(y_exact, n),
            SpaceKind.L2,
        )
        assert err < 5.0 / n ** 2, err

    def grp_noise():
        y = GridFunction.from_callable(lambda s: np.sin(np.pi * s), n)
        yd = add_noise(y, 1e-3, 5)
        lvl = norm(yd - y, SpaceKind.L2)
        assert abs(lvl - 1e-3) <= 1e-14 * 1e-3, lvl

    def grp_gradient():
        f = GridFunction.constant(1.0, n)
        x0 = GridFunction.constant(1.0, n)
        h = SurrogateHandle.fem(prob_a, f, n)
        y = solve_forward_fem(prob_a, x0, f, n)
        yd = add_noise(y, 1e-3, 1)
        cfg = TikhonovConfig(alpha=1e-3, delta=1e-3, eta=1e-6, xi=0.0, x0=x0,
                             space=SpaceKind.H1, nu=prob_a.nu)
        rng = np.random.default_rng(2)
        x = GridFunction(n, 1.0 + 0.05 * rng.standard_normal(n + 1))
        d = GridFunction(n, rng.standard_normal(n + 1))
        v, g = tikhonov_value_and_gradient(h, x, yd, cfg)
        eps = 1e-6
        fd = (tikhonov_value(h, x + eps * d, yd, cfg)
              - tikhonov_value(h, x - eps * d, yd, cfg)) / (2 * eps)
        from .grid import inner
        an = inner(g, d, SpaceKind.H1)
        assert abs(fd - an) <= 1e-4 * max(1.0, abs(an)), (fd, an)

    def grp_mollifier():
        x = GridFunction.from_callable(lambda s: np.sin(np.pi * s) ** 2, n)
        prev = None
        for xi in (0.2, 0.1, 0.05):
            xm = mollify(x, xi)
            assert norm(xm, SpaceKind.L2) <= norm(x, SpaceKind.L2) * (1 + 1e-8)
            e = norm(xm - x, SpaceKind.L2)
            assert prev is None or e <= prev + 1e-12
            prev = e

    def grp_schema():
        assert RUN_COLUMNS == (
            "problem", "surrogate", "n", "N", "delta", "alpha", "eta", "xi",
            "iterations", "gradient_norm", "error_X", "runtime_ms", "seed",
        )
        t = RateTable(("n", "error"), ((2, 1.0),), -2.0, 0.0)
        assert list(t.csv_lines())[0] == "n,error"

    def grp_determinism():
        cfg = StudyConfig("mollify_rate")
        a, b = run_study(cfg), run_study(cfg)
        assert a.rows == b.rows and a.fitted_slope == b.fitted_slope

    return [
        ("discretization", grp_discretization),
        ("noise", grp_noise),
        ("gradient", grp_gradient),
        ("mollifier", grp_mollifier),
        ("schema", grp_schema),
        ("determinism", grp_determinism),
    ]


def _cmd_verify(args) -> int:
    failures = 0
    for name, check in _verify_groups():
        try:
            check()
        except Exception as err:  # report and continue
            failures += 1
            print(f"FAIL {name}: {err}", file=sys.stderr)
            continue
        _say(args, f"ok {name}")
    return 2 if failures else 0


# ---------------------------------------------------------------------------
# entry point


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="invop",
        description="Regularized inversion of 1-D elliptic coefficients "
                    "with learned forward surrogates.",
    )
    p.add_argument("command",
                   choices=["generate", "build", "solve", "study", "verify"])
    p.add_argument("--config", help="path to a key=value config file")
    p.add_argument("--seed", type=int, help="override the configured seed")
    p.add_argument("--out", help="output path (CSV or coefficient file)")
    p.add_argument("--quiet", action="store_true", help="suppress status lines")
    return p


_COMMANDS = {
    "generate": _cmd_generate,
    "build": _cmd_build,
    "solve": _cmd_solve,
    "study": _cmd_study,
    "verify": _cmd_verify,
}


def cli_main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as err:
        return 1 if err.code not in (0, None) else 0
    try:
        return _COMMANDS[args.command](args)
    except (ConfigInvalid, OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except InvopError as err:
        print(f"numerical failure: {type(err).__name__}: {err}", file=sys.stderr)
        return 2


def main():  # console-script entry point
    raise SystemExit(cli_main())


if __name__ == "__main__":
    main()
