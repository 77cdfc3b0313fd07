"""Command-line front end: ``verify``, ``simulate``, ``report`` and ``sweep``.

Run directories hold ``manifest.json``, ``diagnostics.csv``, ``probes.csv`` and
``snapshots/snap_NNNN.{bin,json}``. Snapshot binaries are the samples of u
followed by those of u_t, little-endian float64; the JSON sidecar records the
grid, the time and the layout.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import copy
import csv
import datetime
import itertools
import json
import os
import sys
from typing import Callable, Optional, Sequence

import numpy as np

from . import __version__
from . import analysis as an
from . import closedform as cf
from . import dynamics as dyn
from . import transforms as tr
from .grid import Grid, RealField, make_grid

SNAPSHOT_DIR = "snapshots"
PROBES_FILE = "probes.csv"
DIAGNOSTICS_FILE = "diagnostics.csv"
MANIFEST_FILE = "manifest.json"

EXIT_OK, EXIT_FAIL, EXIT_ERROR, EXIT_ABORT = 0, 1, 2, 3


class ReportError(RuntimeError):
    """A run directory cannot support the requested report."""


# ------------------------------------------------------------ formatting

def _num(x) -> str:
    """Locale-independent shortest round-trip representation."""
    return repr(float(x))


def _write_json(path: str, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return {"re": o.real, "im": o.imag}
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")


# ------------------------------------------------------------ snapshot i/o

def write_snapshot(state: dyn.SimState, directory: str, stem: str) -> list[str]:
    os.makedirs(directory, exist_ok=True)
    # w and w_t are stored too, so reloaded states carry the evolved variable
    # of w-formulation runs instead of recomputing it through D* I
    data = np.concatenate([state.u.values, state.ut.values, state.w, state.wt]).astype("<f8")
    bin_name = stem + ".bin"
    data.tofile(os.path.join(directory, bin_name))
    g = state.grid
    sidecar = {
        "file": bin_name,
        "t": float(state.t),
        "n_points": g.n_points,
        "half_length": g.half_length,
        "endianness": "little",
        "dtype": "float64",
        "fields": ["u", "ut", "w", "wt"],
        "background": state.background,
    }
    _write_json(os.path.join(directory, stem + ".json"), sidecar)
    return [bin_name, stem + ".json"]


def read_snapshot(json_path: str, grid: Optional[Grid] = None) -> dyn.SimState:
    with open(json_path, "r", encoding="utf-8") as fh:
        meta = json.load(fh)
    if meta.get("endianness") != "little" or meta.get("dtype") != "float64":
        raise ReportError(f"{json_path}: unsupported snapshot layout")
    g = grid or make_grid(meta["n_points"], meta["half_length"])
    fields = meta.get("fields", ["u", "ut"])
    data = np.fromfile(os.path.join(os.path.dirname(json_path), meta["file"]), dtype="<f8")
    n = g.n_points
    if data.size != len(fields) * n:
        raise ReportError(f"{json_path}: expected {len(fields) * n} samples, found {data.size}")
    arrays = {name: data[i * n:(i + 1) * n] for i, name in enumerate(fields)}
    st = dyn.SimState(float(meta["t"]), RealField(g, arrays["u"], "none", check=False),
                      RealField(g, arrays["ut"], "none", check=False),
                      meta.get("background", "kink"))
    for name in ("w", "wt"):
        if name in arrays:
            st.__dict__[name] = arrays[name]
    return st


def load_snapshots(run_dir: str, grid: Optional[Grid] = None) -> list[dyn.SimState]:
    d = os.path.join(run_dir, SNAPSHOT_DIR)
    if not os.path.isdir(d):
        return []
    names = sorted(n for n in os.listdir(d) if n.startswith("snap_") and n.endswith(".json"))
    states = [read_snapshot(os.path.join(d, n), grid) for n in names]
    return sorted(states, key=lambda s: s.t)


def write_diagnostics(rows: Sequence[dict], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(dyn.DIAGNOSTIC_COLUMNS)
        for r in rows:
            w.writerow([_num(r[c]) for c in dyn.DIAGNOSTIC_COLUMNS])


def read_diagnostics(path: str) -> dict[str, np.ndarray]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise ReportError(f"{path} has no data rows")
    head = rows[0]
    data = np.array([[float(v) for v in r] for r in rows[1:]])
    return {h: data[:, i] for i, h in enumerate(head)}


def write_probes(probes: Sequence[dyn.ProbeRecord], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if not probes:
            w.writerow(["t", "v0_re", "v0_im"])
            return
        xi = probes[0].xi
        head = ["t", "v0_re", "v0_im"]
        for q in xi:
            head += [f"F_re@{_num(q)}", f"F_im@{_num(q)}"]
        w.writerow(head)
        for p in probes:
            row = [_num(p.t), _num(p.v_origin.real), _num(p.v_origin.imag)]
            for val in p.F:
                row += [_num(val.real), _num(val.imag)]
            w.writerow(row)


def read_probes(path: str) -> list[dyn.ProbeRecord]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        return []
    head = rows[0]
    xi = np.array([float(h.split("@", 1)[1]) for h in head[3::2]])
    out = []
    for r in rows[1:]:
        v = [float(q) for q in r]
        F = np.array(v[3::2]) + 1j * np.array(v[4::2])
        out.append(dyn.ProbeRecord(v[0], xi, F, complex(v[1], v[2])))
    return out


# ------------------------------------------------------------ simulate

def run_simulation(config: dyn.SimConfig, out_dir: str) -> tuple[int, dict]:
    os.makedirs(out_dir, exist_ok=True)
    start = _now()
    sink = dyn.Sink()
    snap_dir = os.path.join(out_dir, SNAPSHOT_DIR)
    files: list[str] = []
    status, code, error = "ok", EXIT_OK, None
    try:
        dyn.simulate(config, sink)
    except dyn.SimulationError as exc:
        status, code, error = "aborted", EXIT_ABORT, str(exc)
        if exc.last_good is not None:
            files += [os.path.join(SNAPSHOT_DIR, f)
                      for f in write_snapshot(exc.last_good, snap_dir, "last_good")]
    for i, st in enumerate(sink.snapshots):
        files += [os.path.join(SNAPSHOT_DIR, f) for f in write_snapshot(st, snap_dir, f"snap_{i:04d}")]
    write_diagnostics(sink.rows, os.path.join(out_dir, DIAGNOSTICS_FILE))
    write_probes(sink.probes, os.path.join(out_dir, PROBES_FILE))
    files += [DIAGNOSTICS_FILE, PROBES_FILE]

    checks = {}
    if sink.rows:
        e = np.array([r["energy"] for r in sink.rows])
        drift = float(np.max(np.abs(e - e[0])) / max(abs(e[0]), 1e-300))
        checks["energy_drift"] = {"value": drift, "tolerance": 1e-8, "passed": drift < 1e-8}
        # wrap-around is expected once the light cone reaches the edge, so the
        # check covers the analysis horizon and the full-run value is informational
        horizon = min(config.t_final, config.check("fit_window")[1])
        leak = max(r["boundary_leak"] for r in sink.rows if r["t"] <= horizon + 1e-9)
        checks["boundary_leak"] = {"value": leak, "tolerance": config.boundary_threshold,
                                   "horizon": horizon,
                                   "passed": leak <= config.boundary_threshold}
        checks["boundary_leak_full_run"] = {"value": max(r["boundary_leak"] for r in sink.rows)}
    manifest = {
        "config_hash": dyn.config_hash(config),
        "code_version": __version__,
        "start_time": start,
        "end_time": _now(),
        "status": status,
        "error": error,
        "config": config.to_dict(),
        "files": sorted(files) + [MANIFEST_FILE],
        "checks": checks,
    }
    _write_json(os.path.join(out_dir, MANIFEST_FILE), manifest)
    return code, manifest


def cmd_simulate(args) -> int:
    if not args.config:
        print("simulate: --config is required", file=sys.stderr)
        return EXIT_ERROR
    try:
        config = dyn.load_config(args.config)
    except (OSError, dyn.ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    out = args.out or "run"
    code, manifest = run_simulation(config, out)
    if code == EXIT_ABORT:
        print(f"simulation aborted: {manifest['error']}", file=sys.stderr)
    else:
        print(f"wrote {out} ({len(manifest['files'])} files)")
    return code


# ------------------------------------------------------------ verify

def _stationary_phase_reports(tol_scale: float, seed: int) -> list[tr.OperatorReport]:
    reps = []
    worst_pt = worst_h = 0.0
    for j in (1, 2, 3, 4):
        for xi in (0.0, 0.5, 1.0, 2.0, 5.0, 10.0):
            d = an.stationary_phase_data(j, xi)
            worst_pt = max(worst_pt, d.point_error)
            worst_h = max(worst_h, d.hessian_error)
    reps.append(tr.OperatorReport.from_value("critical_points", worst_pt, 1e-10 * tol_scale))
    reps.append(tr.OperatorReport.from_value("hessians", worst_h, 1e-12 * tol_scale))
    d = an.stationary_phase_data(2, 3.0)
    reps.append(tr.OperatorReport.from_value("psi2_critical_value", d.critical_value,
                                             1e-14 * tol_scale))
    reps.append(tr.OperatorReport.from_value(
        "swap_identity", an.swap_identity_residual(1000, seed), 1e-14 * tol_scale))
    return reps


def _gradient_reports(seed: int) -> list[tr.OperatorReport]:
    reps = []
    for j in (1, 2):
        for s in an.phase_gradient_bounds_sampler(j, 10.0, 1000, seed):
            reps.append(tr.OperatorReport(s.name, s.ratio_min, s.ratio_max, s.window[1], s.passed))
    return reps


def _decomposition_reports(grid: Grid, tol_scale: float, seed: int) -> list[tr.OperatorReport]:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for eps in (0.01, 0.1):
        w = eps * tr.random_bandlimited(grid, rng, "even")
        worst = max(worst, dyn.nonlinearity_breakdown_w(w, grid).residual())
    return [tr.OperatorReport.from_value("nonlinearity_decomposition", worst, 1e-9 * tol_scale)]


def verify_suites() -> dict[str, Callable[[Grid, float, int], list]]:
    return {
        "factorization": lambda g, s, seed: tr.verify_factorization(g, 50, seed, 1e-9 * s),
        "right_inverse": lambda g, s, seed: tr.verify_right_inverse(g, 50, seed + 1, 1e-9 * s),
        "commutators": lambda g, s, seed: tr.verify_commutators(g, seed + 2, tol=1e-9 * s),
        "z_action": lambda g, s, seed: tr.verify_z_action(g, seed=seed + 3, tol=1e-8 * s),
        "fourier": lambda g, s, seed: (cf.fourier_closed_form_reports(g, 1e-10 * s, 1e-8 * s)
                                       + [cf.I_hat_report(g, 1e-7 * s)]),
        "convolution": lambda g, s, seed: cf.convolution_identities(1e-8 * s, 1e-8 * s),
        "nonresonance": lambda g, s, seed: cf.nonresonance_reports(g, 1e-9 * s, 1e-10 * s),
        "normal_form": lambda g, s, seed: cf.normal_form_reports(1e-8 * s),
        "stationary_phase": lambda g, s, seed: _stationary_phase_reports(s, seed),
        "gradient_bounds": lambda g, s, seed: _gradient_reports(seed),
        "decomposition": lambda g, s, seed: _decomposition_reports(g, s, seed),
    }


def run_verify(names: Optional[Sequence[str]] = None, grid: Optional[Grid] = None,
               tol_scale: float = 1.0, seed: int = 0) -> dict:
    suites = verify_suites()
    names = list(suites) if not names else list(names)
    unknown = [n for n in names if n not in suites]
    if unknown:
        raise ValueError(f"unknown check(s) {unknown}; choose from {sorted(suites)}")
    grid = grid or make_grid(4096, 40.0 * np.pi)
    reports = []
    for n in names:
        for r in suites[n](grid, tol_scale, seed):
            d = r.as_dict()
            d["suite"] = n
            reports.append(d)
    failures = [f"{r['suite']}/{r['name']}" for r in reports if not r["passed"]]
    return {"passed": not failures, "failures": failures, "reports": reports,
            "tol_scale": tol_scale, "seed": seed,
            "grid": {"n_points": grid.n_points, "half_length": grid.half_length}}


def cmd_verify(args) -> int:
    names = [n.strip() for n in args.only.split(",")] if args.only else None
    grid = None
    if args.config:
        try:
            grid = dyn.load_config(args.config).grid
        except (OSError, dyn.ConfigError) as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_ERROR
    try:
        result = run_verify(names, grid, args.tol_scale, args.seed)
    except ValueError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_ERROR
    for r in result["reports"]:
        tag = "PASS" if r["passed"] else "FAIL"
        print(f"{tag} {r['suite']}/{r['name']}: {r['residual_sup']:.3e} (tol {r['tolerance']:.1e})",
              file=sys.stderr)
    print(json.dumps({"passed": result["passed"], "failures": result["failures"]}))
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _write_json(os.path.join(args.out, "verify.json"), result)
    return EXIT_OK if result["passed"] else EXIT_FAIL


# ------------------------------------------------------------ report

def _snapshot_at(states: Sequence[dyn.SimState], t: float, tol: float):
    for s in states:
        if abs(s.t - t) <= tol:
            return s
    return None


def _svg(fig, path: str, data: dict[str, np.ndarray]) -> None:
    """Save deterministic SVG and embed the plotted series as a comment."""
    fig.savefig(path, format="svg", metadata={"Date": None})
    lines = []
    for key, arr in data.items():
        arr = np.asarray(arr).ravel()
        step = max(1, arr.size // 400)
        lines.append(key + ": " + " ".join(_num(v) for v in arr[::step]))
    comment = "<!-- data\n" + "\n".join(lines).replace("--", "- -") + "\n-->\n"
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    head, sep, rest = text.partition("?>\n")
    text = head + sep + comment + rest if sep else comment + text
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _plots(out_dir: str, diag: dict, snaps: list, probes: list, recon) -> list[str]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "sgkink"
    files = []

    t = diag["t"]
    sel = t >= 1.0
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.loglog(t[sel], diag["sup_u"][sel], label="sup |u| (light cone)")
    ax.loglog(t[sel], diag["sup_v"][sel], label="sup |v|")
    if sel.any():
        ref = diag["sup_u"][sel][0] * t[sel] ** -0.5
        ax.loglog(t[sel], ref, "k--", lw=0.8, label="t^(-1/2)")
    ax.set_xlabel("t")
    ax.legend()
    _svg(fig, os.path.join(out_dir, "decay.svg"),
         {"t": t[sel], "sup_u": diag["sup_u"][sel], "sup_v": diag["sup_v"][sel]})
    plt.close(fig)
    files.append("decay.svg")

    if snaps:
        g = snaps[0].f_hat.grid
        xs, order = g.sorted_frequencies()
        keep = np.abs(xs) <= 6.0
        fig, ax = plt.subplots(figsize=(6, 4))
        data = {"xi": xs[keep]}
        for p in snaps[:: max(1, len(snaps) // 5)]:
            m = np.abs(p.weighted)[order][keep]
            ax.plot(xs[keep], m, label=f"t = {p.t:g}")
            data[f"t={p.t:g}"] = m
        ax.set_xlabel("xi")
        ax.set_ylabel("<xi>^(3/2) |f^|")
        ax.legend()
        _svg(fig, os.path.join(out_dir, "profile_modulus.svg"), data)
        plt.close(fig)
        files.append("profile_modulus.svg")

    if probes:
        tp = np.array([p.t for p in probes])
        sel = tp >= 1.0
        G = np.array([p.F for p in probes]) + an.normal_form_correction(
            tp, np.array([p.v_origin for p in probes]), probes[0].xi)
        ph = np.unwrap(np.angle(G[sel]), axis=0)
        fig, ax = plt.subplots(figsize=(6, 4))
        data = {"log_t": np.log(tp[sel])}
        for j, q in enumerate(probes[0].xi):
            ax.plot(np.log(tp[sel]), ph[:, j] - ph[0, j], label=f"xi = {q:g}")
            data[f"xi={q:g}"] = ph[:, j] - ph[0, j]
        ax.set_xlabel("log t")
        ax.set_ylabel("phase drift")
        ax.legend()
        _svg(fig, os.path.join(out_dir, "phase_logt.svg"), data)
        plt.close(fig)
        files.append("phase_logt.svg")

    if recon is not None:
        x, us, ua = recon
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(x, us, label="simulation")
        ax.plot(x, ua, "--", label="asymptotic formula")
        ax.set_xlabel("x")
        ax.legend()
        _svg(fig, os.path.join(out_dir, "reconstruction.svg"), {"x": x, "u_sim": us, "u_asym": ua})
        plt.close(fig)
        files.append("reconstruction.svg")
    return files


def build_report(run_dir: str, out_dir: Optional[str] = None) -> dict:
    """Analyse a run directory; returns the summary written to report.json."""
    out_dir = out_dir or run_dir
    mpath = os.path.join(run_dir, MANIFEST_FILE)
    if not os.path.isfile(mpath):
        raise ReportError(f"{run_dir} has no {MANIFEST_FILE}")
    with open(mpath, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    config = dyn.SimConfig.from_dict(manifest["config"])
    grid = config.grid
    states = load_snapshots(run_dir, grid)
    diag = read_diagnostics(os.path.join(run_dir, DIAGNOSTICS_FILE))
    probes_path = os.path.join(run_dir, PROBES_FILE)
    probes = read_probes(probes_path) if os.path.isfile(probes_path) else []
    window = config.check("fit_window")
    states = [s for s in states if s.t >= 1.0 - 1e-9]
    if len(states) < 4 or states[-1].t / states[0].t < 10.0 - 1e-9:
        raise ReportError("snapshots must number at least 4 and span a decade from t = 1")
    os.makedirs(out_dir, exist_ok=True)
    linear = config.nonlinearity == "off"
    summary: dict = {"run": os.path.abspath(run_dir), "config_hash": manifest["config_hash"],
                     "checks": {}}
    checks = summary["checks"]

    # decay fits from diagnostics
    lo, hi = config.check("decay_band")
    exp_u = an.fit_exponent(diag["t"], diag["sup_u"], window)
    llo, lhi = config.check("localdecay_band")
    exp_l = an.fit_exponent(diag["t"], diag["localdecay_dxv"], window)
    t = diag["t"]
    jt = np.sqrt(1.0 + t**2)
    in10 = (t >= 10.0 - 1e-9) & (t <= window[1] + 1e-9)
    boot = {"ratio_min": None, "ratio_max": None, "passed": None}
    if in10.any():
        b = jt[in10] ** 0.5 * diag["sup_v"][in10]
        r = b / b[0]
        boot = {"ratio_min": float(r.min()), "ratio_max": float(r.max()),
                "passed": bool(r.max() <= 3.0 and r.min() >= 1.0 / 3.0)}
    decay = {"window": window, "exponent": exp_u, "band": [lo, hi],
             "passed": bool(lo <= exp_u <= hi),
             "localdecay_exponent": exp_l, "localdecay_band": [llo, lhi],
             "localdecay_passed": bool(llo <= exp_l <= lhi),
             "bootstrap_sup_v": boot}
    _write_json(os.path.join(out_dir, "decay_fit.json"), decay)
    checks["decay"] = decay["passed"]
    checks["local_decay"] = decay["localdecay_passed"]

    # modified scattering, restricted to times before the light cone wraps
    profiles = [an.extract_profile(s) for s in states if s.t <= window[1] + 1e-9]
    herm = max(p.hermitian_defect() / max(np.max(np.abs(p.f_hat.coefficients)), 1e-300)
               for p in profiles)
    cauchy = [c for c in config.check("cauchy_times") if c <= window[1] + 1e-9]
    rep = an.modified_scattering_check(profiles, probes or None, window, cauchy,
                                       config.check("psi_frequencies"),
                                       integrating_factor=not linear)
    ms = rep.to_json()
    smax = config.check("stabilization_max")
    plo, phi = config.check("psi_band")
    ms["stabilization_max"] = smax
    ms["stabilization_passed"] = bool(rep.stabilization_exponent <= smax)
    ms["psi_band"] = [plo, phi]
    ms["psi_passed"] = bool(np.all((rep.psi_ratio >= plo) & (rep.psi_ratio <= phi)))
    ms["max_cauchy_difference"] = float(np.max(rep.cauchy_differences))
    ms["hermitian_defect"] = herm
    ms["integrating_factor"] = not linear
    _write_json(os.path.join(out_dir, "modified_scattering.json"), ms)
    checks["stabilization"] = ms["stabilization_passed"]
    checks["phase_law"] = ms["psi_passed"]

    # profile ODE residual on stored triples
    tol = 0.5 * config.dt
    triples = []
    for tc in config.ode_residual_times:
        d = dyn.residual_spacing(tc)
        trio = [_snapshot_at(states, q, tol) for q in (tc - d, tc, tc + d)]
        if all(s is not None for s in trio):
            triples.append(tuple(an.extract_profile(s) for s in trio))
    rows = an.profile_ode_residual(triples) if triples else []
    with open(os.path.join(out_dir, "ode_residual.csv"), "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "delta", "residual_sup", "residual_scaled", "lhs_sup"])
        for r in rows:
            w.writerow([_num(r.t), _num(r.delta), _num(r.residual_sup), _num(r.scaled),
                        _num(r.lhs_sup)])
    trend = an.residual_trend(rows) if len(rows) >= 2 else None
    summary["ode_residual_trend"] = trend
    if trend is not None:
        checks["ode_residual"] = bool(trend <= 0.0)

    # reconstruction overlay
    recon = None
    tr_time = config.check("reconstruction_time")
    st = _snapshot_at(states, tr_time, tol)
    if st is not None and not linear:
        tW, W = an.limiting_profile(profiles, window[1])
        ua = an.asymptotic_reconstruction(W, st.t, grid)
        ratio = an.reconstruction_ratio(st.u, ua, st.t, config.light_cone_fraction)
        bound = config.check("reconstruction_ratio")
        _write_json(os.path.join(out_dir, "reconstruction.json"),
                    {"t": st.t, "W_time": tW, "ratio": ratio, "bound": bound,
                     "passed": bool(ratio < bound)})
        checks["reconstruction"] = bool(ratio < bound)
        gate = dyn.light_cone_mask(grid, st.t, config.light_cone_fraction)
        recon = (grid.x[gate], st.u.values[gate], ua.values[gate])

    summary["plots"] = _plots(out_dir, diag, profiles, probes, recon)
    summary["passed"] = bool(all(checks.values()))
    _write_json(os.path.join(out_dir, "report.json"), summary)
    return summary


def cmd_report(args) -> int:
    run_dir = args.run_dir or args.out
    if not run_dir:
        print("report: give a run directory", file=sys.stderr)
        return EXIT_ERROR
    try:
        summary = build_report(run_dir, args.out if args.run_dir else None)
    except (ReportError, an.InsufficientDataError, dyn.ConfigError, OSError, ValueError) as exc:
        print(f"report error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    for k, v in summary["checks"].items():
        print(f"{'PASS' if v else 'FAIL'} {k}")
    return EXIT_OK if summary["passed"] else EXIT_FAIL


# ------------------------------------------------------------ sweep

def _expand_sweep(tree: dict) -> list[tuple[dict, dict]]:
    base = tree.get("base", {})
    vary = tree.get("vary", {})
    unknown = set(tree) - {"base", "vary", "report"}
    if unknown:
        raise dyn.ConfigError(f"unknown sweep key(s) {sorted(unknown)}")
    keys = sorted(vary)
    out = []
    for combo in itertools.product(*(vary[k] for k in keys)):
        cfg = copy.deepcopy(base)
        params = {}
        for k, v in zip(keys, combo):
            section, _, name = k.partition(".")
            if not name:
                raise dyn.ConfigError(f"sweep key {k!r} must look like section.key")
            cfg.setdefault(section, {})[name] = v
            params[k] = v
        dyn.SimConfig.from_dict(cfg)  # validate before launching anything
        out.append((cfg, params))
    return out


def _sweep_job(job: tuple[dict, str, bool]) -> dict:
    tree, out_dir, report = job
    code, _ = run_simulation(dyn.SimConfig.from_dict(tree), out_dir)
    result = {"dir": out_dir, "simulate_exit": code}
    if report and code == EXIT_OK:
        try:
            result["report_passed"] = build_report(out_dir)["passed"]
        except (ReportError, an.InsufficientDataError) as exc:
            result["report_error"] = str(exc)
    return result


def cmd_sweep(args) -> int:
    if not args.config:
        print("sweep: --config is required", file=sys.stderr)
        return EXIT_ERROR
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            tree = json.load(fh)
        runs = _expand_sweep(tree)
    except json.JSONDecodeError as exc:
        print(f"config error: {args.config}:{exc.lineno}:{exc.colno}: {exc.msg}", file=sys.stderr)
        return EXIT_ERROR
    except (OSError, dyn.ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    out = args.out or "sweep"
    os.makedirs(out, exist_ok=True)
    jobs = [(cfg, os.path.join(out, f"run_{i:03d}"), bool(tree.get("report", False)))
            for i, (cfg, _) in enumerate(runs)]
    if args.jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.jobs) as ex:
            results = list(ex.map(_sweep_job, jobs))
    else:
        results = [_sweep_job(j) for j in jobs]
    for (_, params), res in zip(runs, results):
        res["parameters"] = params
    _write_json(os.path.join(out, "sweep.json"), {"runs": results})
    ok = all(r["simulate_exit"] == EXIT_OK and r.get("report_passed", True) for r in results)
    print(f"{len(results)} run(s) in {out}")
    return EXIT_OK if ok else EXIT_FAIL


# ------------------------------------------------------------ entry point

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sgkink", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", metavar="PATH")
        sp.add_argument("--out", metavar="DIR")

    v = sub.add_parser("verify", help="run the identity suites")
    common(v)
    v.add_argument("--only", metavar="NAME[,NAME]")
    v.add_argument("--tol-scale", type=float, default=1.0)
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("simulate", help="evolve a perturbed kink")
    common(s)
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("report", help="analyse a run directory")
    r.add_argument("run_dir", nargs="?")
    r.add_argument("--out", metavar="DIR")
    r.set_defaults(func=cmd_report)

    w = sub.add_parser("sweep", help="run a parameter sweep")
    common(w)
    w.add_argument("--jobs", type=int, default=1)
    w.set_defaults(func=cmd_sweep)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return int(args.func(args))


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
