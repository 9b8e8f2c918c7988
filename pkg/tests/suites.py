"""Shared fixtures-as-functions for the integration and acceptance tests."""
import numpy as np

from blowup.integrate import check_envelope, extremal_scalar_field, integrate_ivp, region_margin
from blowup.odi_core import NotCertified, OdiParams, certify_scalar

SUB = OdiParams(1.0, 2.0, 1.5)
SUPER = OdiParams(1.0, 1.0, 2.5)


def random_certified(params, n, seed, box=((-3.0, 3.0), (0.0, 3.0))):
    """Rejection-sample ``n`` certified initial points from ``box``."""
    rng = np.random.default_rng(seed)
    (x_lo, x_hi), (y_lo, y_hi) = box
    out = []
    while len(out) < n:
        v0, v1 = rng.uniform(x_lo, x_hi), rng.uniform(y_lo, y_hi)
        try:
            out.append(certify_scalar(params, v0, v1))
        except NotCertified:
            continue
    return out


def run_suite(params, n=100, seed=0, slack=0.02):
    """Integrate each sampled point; collect margins, envelope reports, timings."""
    field = extremal_scalar_field(params)
    rows = []
    for cert in random_certified(params, n, seed):
        traj = integrate_ivp(field, cert.initial)
        margin = region_margin(cert, traj.states)
        rows.append((cert, traj, float(margin.min()), check_envelope(traj, cert, slack)))
    return rows


def cli_commands(root):
    """Every acceptance-level CLI invocation, with files written under ``root``.

    Returns ``(name, argv, stdout_file)`` triples; simulate and region runs
    also write their own outputs under ``root / name``.
    """
    import json

    root.mkdir(parents=True, exist_ok=True)
    cfg = root / "empty.json"
    cfg.write_text("{}")
    ws = root / "wave_system.json"
    ws.write_text(json.dumps({"problem": {"n_modes": 16, "n_quad": 64}}))
    cmds = [
        ("certify_scalar_sub", ["certify", "scalar", "--a", "1", "--b", "2", "--q", "1.5",
                                "--v0", "0", "--v1", "1"]),
        ("certify_scalar_super", ["certify", "scalar", "--a", "1", "--b", "1", "--q", "2.5",
                                  "--v0", "0", "--v1", "1"]),
        ("certify_system", ["certify", "system", "--a", "1", "--p", "1.5", "--q", "2",
                            "--U0", "4", "--V0", "4", "--U1", "4", "--V1", "4"]),
        ("region_subq", ["region", "--kind", "subq", "--a", "1", "--b", "2", "--q", "1.5",
                         "--range", "-2", "5", "--output", str(root / "region_subq.csv")]),
        ("region_superq", ["region", "--kind", "superq", "--a", "1", "--b", "1", "--q", "2.5",
                           "--v0", "0", "--v1", "1", "--range", "0", "10",
                           "--output", str(root / "region_superq.csv")]),
        ("compare_levine", ["compare-levine", "--lambda", "1", "--C", "1", "--q", "1.5",
                            "--samples", "10000", "--seed", "0"]),
    ]
    for kind in ("odi", "system", "wave", "elliptic", "parabolic"):
        cmds.append((f"simulate_{kind}", ["simulate", kind, "--config", str(cfg),
                                          "--output-dir", str(root / f"sim_{kind}")]))
    cmds.append(("simulate_wave_system", ["simulate", "system", "--config", str(ws),
                                          "--output-dir", str(root / "sim_wave_system")]))
    return [(name, argv, root / f"{name}.stdout") for name, argv in cmds]


def run_cli(argv):
    """Run the CLI in-process; return (exit code, stdout text)."""
    import contextlib
    import io

    from blowup.cli import main

    buf = io.StringIO()
    with contextlib.redirect_stdout(buf):
        try:
            code = main(argv)
        except SystemExit as exc:  # argparse usage errors
            code = exc.code
    return code, buf.getvalue()


def snapshot_tree(root):
    """Map relative path -> bytes for every file under ``root``."""
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*"))
            if p.is_file()}
