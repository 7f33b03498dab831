"""Latency benchmarks comparing direct in-process calls with the wire API.

One iteration of each workload:

* ``step``        -- advance the simulation one step.
* ``step-query``  -- one step plus a tip position read (two wire round
                     trips in the remote modes).
* ``episode``     -- one inner-loop pass of a vision-driven control episode:
                     capture rgb + depth, pick a pseudo-random action, send
                     joint target velocities, step, read the tip position;
                     every 32nd iteration also repositions the target.

Modes: ``direct`` (same-thread calls on the simulator), ``remote-step``
(wire API against a continuously stepping server) and ``remote-fixed``
(wire API against a fixed-interval servicer, interval configurable).
Remote servers run in a subprocess so the two sides never share a GIL.
"""

import argparse
import csv
import os
import subprocess
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import render
from . import scene as scene_mod
from . import simulation
from .client import RemoteClient
from .errors import SimError

MODES = ("direct", "remote-step", "remote-fixed")
WORKLOADS = ("step", "step-query", "episode")

CSV_COLUMNS = ("mode", "workload", "n_calls", "mean_s", "p50_s", "p99_s",
               "cps", "speedup_vs_direct")

# Auto call counts; remote calls are individually ~10^3 slower, episodes
# carry two renders per iteration.
_DEFAULT_CALLS = {
    ("direct", "step"): 10_000,
    ("direct", "step-query"): 10_000,
    ("direct", "episode"): 500,
    ("remote-step", "step"): 1_000,
    ("remote-step", "step-query"): 1_000,
    ("remote-step", "episode"): 100,
    ("remote-fixed", "step"): 400,
    ("remote-fixed", "step-query"): 400,
    ("remote-fixed", "episode"): 50,
}


@dataclass
class LatencyStats:
    mode: str
    workload: str
    n_calls: int
    mean_s: float
    p50_s: float
    p99_s: float
    min_s: float
    max_s: float
    cps: float
    speedup_vs_direct: float = 1.0
    samples: np.ndarray = field(default=None, repr=False)

    @classmethod
    def from_samples(cls, mode, workload, samples):
        samples = np.asarray(samples, dtype=float)
        return cls(
            mode=mode,
            workload=workload,
            n_calls=len(samples),
            mean_s=float(samples.mean()),
            p50_s=float(np.percentile(samples, 50)),
            p99_s=float(np.percentile(samples, 99)),
            min_s=float(samples.min()),
            max_s=float(samples.max()),
            cps=float(len(samples) / samples.sum()),
            samples=samples,
        )

    @property
    def iqr_s(self):
        lo, hi = np.percentile(self.samples, [25, 75])
        return float(hi - lo)


def default_calls(mode, workload):
    return _DEFAULT_CALLS[(mode, workload)]


def _time_calls(op, calls, warmup):
    for _ in range(warmup):
        op()
    samples = np.empty(calls)
    clock = time.perf_counter
    for i in range(calls):
        t0 = clock()
        op()
        samples[i] = clock() - t0
    return samples


def _action_table(dof, seed=0):
    rng = np.random.default_rng(seed)
    return rng.uniform(-0.8, 0.8, size=(64, dof))


def _target_table(seed=1):
    rng = np.random.default_rng(seed)
    table = rng.uniform(-0.6, 0.6, size=(16, 3))
    table[:, 2] = rng.uniform(0.3, 0.8, size=16)
    return table


def _discover_direct(sim, arm_name, sensor_name):
    scene = sim.scene
    joints = []
    i = 1
    while True:
        try:
            joints.append(scene.handle_of(f"{arm_name}_joint{i}"))
        except Exception:
            break
        i += 1
    tip = scene.handle_of(f"{arm_name}_tip")
    sensor = scene.handle_of(sensor_name)
    target = scene.handle_of("target")
    return joints, tip, sensor, target


def _direct_op(sim, workload, arm_name, sensor_name):
    scene = sim.scene
    joints, tip, sensor, target = _discover_direct(sim, arm_name, sensor_name)
    if workload == "step":
        return sim.step
    if workload == "step-query":
        def op():
            sim.step()
            scene_mod.get_position(scene, tip)
        return op

    actions = _action_table(len(joints))
    targets = _target_table()
    counter = [0]

    def op():
        i = counter[0]
        counter[0] = i + 1
        if i % 32 == 0:
            scene_mod.set_position(scene, target, targets[(i // 32) % 16])
        render.capture_rgb(scene, sensor)
        render.capture_depth(scene, sensor)
        for handle, v in zip(joints, actions[i % 64]):
            sim.set_joint_target_velocity(handle, v)
        sim.step()
        scene_mod.get_position(scene, tip)
    return op


def _remote_op(client, workload, arm_name, sensor_name):
    joints = []
    i = 1
    while True:
        try:
            joints.append(client.get_handle(f"{arm_name}_joint{i}"))
        except Exception:
            break
        i += 1
    tip = client.get_handle(f"{arm_name}_tip")
    if workload == "step":
        return client.step
    if workload == "step-query":
        def op():
            client.step()
            client.get_position(tip)
        return op

    sensor = client.get_handle(sensor_name)
    target = client.get_handle("target")
    actions = _action_table(len(joints))
    targets = _target_table()
    counter = [0]

    def op():
        i = counter[0]
        counter[0] = i + 1
        if i % 32 == 0:
            client.set_position(target, targets[(i // 32) % 16])
        client.capture_rgb(sensor)
        client.capture_depth(sensor)
        client.set_joint_target_velocities(zip(joints, actions[i % 64]))
        client.step()
        client.get_position(tip)
    return op


def spawn_server(scene, service, interval_ms=5.0, busy_step=False):
    """Start a kernel server subprocess; returns (process, port)."""
    cmd = [
        sys.executable, "-m", "simkernel.server",
        "--scene", str(scene), "--port", "0",
        "--service", service, "--interval-ms", str(interval_ms), "--start",
    ]
    if busy_step:
        cmd.append("--busy-step")
    proc = subprocess.Popen(cmd, stdout=subprocess.PIPE,
                            stderr=subprocess.PIPE, text=True)
    line = proc.stdout.readline()
    if "listening on" not in line:
        err = proc.stderr.read() if proc.poll() is not None else ""
        proc.kill()
        raise RuntimeError(f"server failed to start: {line!r} {err.strip()}")
    port = int(line.rsplit(":", 1)[1])
    return proc, port


def run_bench(mode, workload, scene, calls=None, warmup=None,
              interval_ms=5.0, arm_name="Franka", sensor_name="my_camera"):
    """Measure one (mode, workload) cell and return its LatencyStats."""
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if workload not in WORKLOADS:
        raise ValueError(f"unknown workload {workload!r}")
    if calls is None:
        calls = default_calls(mode, workload)
    if warmup is None:
        warmup = min(1000, max(10, calls // 10))

    if mode == "direct":
        sim = simulation.launch(scene, headless=True)
        sim.start()
        op = _direct_op(sim, workload, arm_name, sensor_name)
        samples = _time_calls(op, calls, warmup)
        return LatencyStats.from_samples(mode, workload, samples)

    service = "step" if mode == "remote-step" else "fixed"
    proc, port = spawn_server(scene, service, interval_ms=interval_ms,
                              busy_step=mode == "remote-step")
    try:
        with RemoteClient(port=port, timeout=30.0) as client:
            op = _remote_op(client, workload, arm_name, sensor_name)
            samples = _time_calls(op, calls, warmup)
    finally:
        proc.terminate()
        proc.wait(timeout=10.0)
    return LatencyStats.from_samples(mode, workload, samples)


def emit_report(stats_list, path):
    """Append rows to a CSV, writing the header only when the file is new."""
    rows = []
    for st in stats_list:
        rows.append({col: getattr(st, col) for col in CSV_COLUMNS})
    new_file = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        if new_file:
            writer.writeheader()
        writer.writerows(rows)


def read_results(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def format_table(rows):
    if not rows:
        return "(no results)"
    headers = list(rows[0].keys())
    table = [headers]
    for row in rows:
        formatted = []
        for key in headers:
            val = row[key]
            try:
                num = float(val)
            except (TypeError, ValueError):
                formatted.append(str(val))
                continue
            if key in ("n_calls",):
                formatted.append(f"{int(num)}")
            elif key in ("cps", "speedup_vs_direct"):
                formatted.append(f"{num:,.1f}")
            else:
                formatted.append(f"{num * 1e6:,.2f}us")
        table.append(formatted)
    widths = [max(len(r[i]) for r in table) for i in range(len(headers))]
    lines = []
    for i, row in enumerate(table):
        lines.append("  ".join(cell.rjust(w) for cell, w in zip(row, widths)))
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)


def _cmd_run(args):
    stats = []
    remote = run_bench(args.mode, args.workload, args.scene, calls=args.calls,
                       warmup=args.warmup, interval_ms=args.interval_ms)
    if args.mode != "direct":
        # Pair every remote measurement with a direct baseline so the CSV
        # row carries the slowdown factor on the same machine and workload.
        direct = run_bench("direct", args.workload, args.scene)
        remote.speedup_vs_direct = remote.mean_s / direct.mean_s
        stats.append(direct)
    stats.append(remote)
    if args.out:
        emit_report(stats, args.out)
    rows = [{col: getattr(st, col) for col in CSV_COLUMNS} for st in stats]
    print(format_table(rows))
    return 0


def _cmd_report(args):
    try:
        rows = read_results(args.infile)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(format_table(rows))
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="bench", description="Direct-vs-remote latency benchmarks.")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="measure one mode/workload cell")
    run_p.add_argument("--mode", choices=MODES, required=True)
    run_p.add_argument("--workload", choices=WORKLOADS, default="step-query")
    run_p.add_argument("--scene", required=True)
    run_p.add_argument("--calls", type=int, default=None)
    run_p.add_argument("--warmup", type=int, default=None)
    run_p.add_argument("--interval-ms", type=float, default=5.0)
    run_p.add_argument("--out", default=None, help="CSV file to append to")
    run_p.set_defaults(func=_cmd_run)

    rep_p = sub.add_parser("report", help="print a results CSV as a table")
    rep_p.add_argument("--in", dest="infile", required=True)
    rep_p.set_defaults(func=_cmd_report)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (RuntimeError, OSError, ValueError, SimError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
