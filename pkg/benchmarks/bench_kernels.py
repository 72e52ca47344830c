"""Compare the numba and numpy kernel backends.

    python3 benchmarks/bench_kernels.py [--cases N] [--repeat R]

Times the raw successor kernel on the joint supply-chain net and the full
simulate + federate pipeline under each backend.
"""
import argparse
import time


from fedcc import _kernels
from fedcc.communication import local_comm_matrix
from fedcc.eventlog import project_public
from fedcc.federation import OrgShare, compose_all, federate
from fedcc.generator import build_reference_models, generate
from fedcc.petri import to_public


def kernel_loop(cn, vec, n):
    t0 = time.perf_counter()
    for _ in range(n):
        _kernels.successors(vec, cn.pre, cn.post)
    return time.perf_counter() - t0


def pipeline(cases, seed):
    t0 = time.perf_counter()
    ds = generate(cases, seed)
    shares = [OrgShare(o, project_public(ds.logs[o]), to_public(ds.nets[o]), local_comm_matrix(ds.logs[o], ds.nets[o]))
              for o in sorted(ds.nets)]
    federate(shares)
    return time.perf_counter() - t0


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cases", type=int, default=297)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--calls", type=int, default=50_000)
    args = ap.parse_args()

    joint = compose_all(list(build_reference_models().values()))
    cn = joint.net.compiled
    vec = cn.vector(joint.system.initial)
    print(f"{'backend':8} {'successors/call (us)':>22} {'pipeline (s)':>14}")
    for name in ("numba", "numpy"):
        _kernels.set_backend(name)
        _kernels.warmup()
        pipeline(5, 0)
        k = min(kernel_loop(cn, vec, args.calls) for _ in range(args.repeat)) / args.calls * 1e6
        p = min(pipeline(args.cases, 7) for _ in range(args.repeat))
        print(f"{name:8} {k:22.2f} {p:14.3f}")


if __name__ == "__main__":
    main()
