#!/usr/bin/env python3
"""Writes a small synthetic sacct dump (pipe-delimited) for demos and smoke tests."""

import argparse
import datetime as dt
import random

HEADER = [
    "JobID", "Account", "JobName", "State", "Submit", "Start", "End", "Elapsed", "ElapsedRaw",
    "Timelimit", "ReqCPUS", "AllocCPUS", "NCPUS", "ReqNodes", "NNodes", "ReqMem", "MaxRSS",
    "AveRSS", "MaxVMSize", "CPUTimeRaw", "TotalCPU", "AveCPUFreq", "MaxDiskRead", "MaxDiskWrite",
]

ACCOUNTS = ["physics_alice", "physics_bob", "bio_carol", "bio_dave", "chem_erin", "cs_frank", "cs_grace"]
NAMES = ["md_run", "align_reads", "dft_relax", "train_model", "mesh_solve", "blast_query", "postproc"]


def hms(seconds):
    d, rem = divmod(int(seconds), 86400)
    h, rem = divmod(rem, 3600)
    m, s = divmod(rem, 60)
    core = f"{h:02d}:{m:02d}:{s:02d}"
    return f"{d}-{core}" if d else core


def mem(bytes_):
    return f"{bytes_ / 1024:.0f}K"


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--rows", type=int, default=300)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()
    rng = random.Random(args.seed)
    t0 = dt.datetime(2023, 3, 1, 8, 0, 0)
    print("|".join(HEADER))
    for i in range(args.rows):
        account = rng.choice(ACCOUNTS)
        name = f"{rng.choice(NAMES)}_{rng.randint(1, 4)}"
        cpus = rng.choice([1, 2, 4, 8, 16])
        nodes = 1 if cpus <= 8 else rng.choice([1, 2])
        req_gb = rng.choice([1, 2, 4, 8, 16, 32])
        per_core = rng.random() < 0.3
        req_mem = f"{max(1, req_gb * 1024 // cpus)}Mc" if per_core else f"{req_gb}Gn"
        limit = rng.choice([1800, 3600, 7200, 14400, 86400])
        runtime = max(30, int(limit * rng.uniform(0.05, 1.1)))
        rss = req_gb * 1024**3 * rng.uniform(0.1, 1.2)
        state = "COMPLETED"
        if runtime > limit:
            state, runtime = "TIMEOUT", limit
        elif rss > req_gb * 1024**3:
            state, rss = "OUT_OF_MEMORY", req_gb * 1024**3
        elif rng.random() < 0.08:
            state = "FAILED"
        elif rng.random() < 0.04:
            state = "CANCELLED by 1234"
        submit = t0 + dt.timedelta(seconds=i * 611 + rng.randint(0, 600))
        start = submit + dt.timedelta(seconds=rng.randint(0, 1800))
        end = start + dt.timedelta(seconds=runtime)
        running = i % 97 == 13
        if running:
            state = "RUNNING"
        cputime = runtime * cpus
        row = [
            str(1000 + i), account, name, state, submit.isoformat(), start.isoformat(),
            "Unknown" if running else end.isoformat(), hms(runtime), str(runtime), hms(limit),
            str(cpus), str(cpus), str(cpus), str(nodes), str(nodes), req_mem, mem(rss),
            mem(rss * rng.uniform(0.5, 0.95)), mem(rss * rng.uniform(1.1, 1.6)), str(cputime),
            hms(cputime * rng.uniform(0.6, 0.99)), f"{rng.uniform(2.0, 3.2):.2f}G",
            mem(rng.uniform(1e6, 5e9)), mem(rng.uniform(1e6, 2e9)),
        ]
        print("|".join(row))


if __name__ == "__main__":
    main()
