"""The 25 registered benchmarks: presets, oracles and metrics for each.

Size classes step the work by roughly 4x; class 1 is sized to finish well
under a second per pass on a commodity machine.
"""

from __future__ import annotations

import numba
import numpy as np

from heterobench import level0, level1
from heterobench.dnn import composite as C
from heterobench.dnn import layers as L
from heterobench.dnn import reference as R
from heterobench.dnn.gradcheck import RTOL
from heterobench.dnn.probes import run_probe
from heterobench.harness import BenchmarkDescriptor, Param, Registry, digest
from heterobench.level2 import dwt, kmeans, lavamd, mandelbrot, nw, srad, where

MIB = 1 << 20


def _classes(**columns) -> dict[int, dict]:
    """``_classes(n=(a, b, c, d), k=3)`` -> per-class preset dicts."""
    out = {}
    for c in range(4):
        out[c + 1] = {k: (v[c] if isinstance(v, tuple) else v) for k, v in columns.items()}
    return out


def _int(lo=1, hi=None, help=""):
    return Param(int, lo, hi, help=help)


def _choice(*options, help=""):
    return Param(str, choices=options, help=help)


def _lanes() -> int:
    return numba.get_num_threads()


# --------------------------------------------------------------------------
# Level 0
# --------------------------------------------------------------------------

def _busspeed(direction: str, name: str, description: str) -> BenchmarkDescriptor:
    def setup(p, rng):
        return {"buffers": level0.CopyBuffers(p["max_kb"] * level0.KIB, rng),
                "sizes": level0.default_copy_sizes(p["max_kb"])}

    def compute(s, p):
        return level0.copy_bandwidth(direction, s["sizes"], s["buffers"], p["reps"])

    def verify(s, out, p):
        n = max(s["sizes"])
        buf = s["buffers"]
        ok = out.sizes == s["sizes"] and np.array_equal(buf.a[:n], buf.b[:n])
        return ok, {"sizes": s["sizes"], "buffer_sha256": digest(buf.a[:n])}

    return BenchmarkDescriptor(
        name=name, level=0, dwarf=None, domain="transfer", description=description,
        presets=_classes(max_kb=(500, 2000, 8000, 32000), reps=16),
        params={"max_kb": _int(1, 1 << 22, "largest copy in KiB"),
                "reps": _int(16, 1 << 20, "timed repetitions per size")},
        setup=setup, compute=compute, verify=verify,
        metrics=lambda p, out, s: {"gbytes_per_sec": out.points[-1][1],
                                   "peak_gbytes_per_sec": out.peak},
        details=lambda p, out: {"points": [list(pt) for pt in out.points]},
        footprint=lambda p: 2 * p["max_kb"] * level0.KIB,
        notes=lambda p: ["host buffer-to-buffer copy; no PCIe bus is involved"])


def _devicememory() -> BenchmarkDescriptor:
    def setup(p, rng):
        return {"data_seed": int(rng.integers(0, 2 ** 63))}

    def compute(s, p):
        sets = level0.default_working_sets(p["max_mb"] * MIB)
        return level0.memory_hierarchy_bandwidth(
            sets, p["pattern"], workers=_lanes(), rng=np.random.default_rng(s["data_seed"]))

    def verify(s, out, p):
        # data checks (checksums, triad sample) run inside the sweep itself
        sets = level0.default_working_sets(p["max_mb"] * MIB)
        return len(out.points) == len(sets), {"working_sets": out.sizes}

    def notes(p):
        llc = level0.last_level_cache_bytes()
        reach = p["max_mb"] * MIB / llc
        msg = [f"last-level cache estimate {llc // MIB} MiB; sweep reaches {reach:.2f}x of it"]
        if reach < 8:
            msg.append("sweep ends below 8x the cache estimate; raise max_mb for a DRAM-bound endpoint")
        return msg

    return BenchmarkDescriptor(
        name="devicememory", level=0, domain="memory hierarchy",
        description="read/write/triad bandwidth across cache-to-DRAM working sets",
        presets=_classes(max_mb=(32, 128, 512, 2048), pattern="triad"),
        params={"max_mb": _int(1, 1 << 20, "largest working set in MiB"),
                "pattern": _choice("read", "write", "triad")},
        setup=setup, compute=compute, verify=verify,
        metrics=lambda p, out, s: {"gbytes_per_sec": out.peak,
                                   "cache_gbytes_per_sec": out.points[0][1],
                                   "memory_gbytes_per_sec": out.points[-1][1]},
        details=lambda p, out: {"points": [list(pt) for pt in out.points]},
        footprint=lambda p: p["max_mb"] * MIB, notes=notes)


def _maxflops() -> BenchmarkDescriptor:
    def verify(s, out, p):
        vals = out.accumulators
        if out.emulated:
            vals = np.array([level0.f16_bits_to_f32(v) for v in vals.ravel()])
        ok = bool(np.isfinite(vals).all() and (vals != 0).all() and out.gflops > 0)
        return ok, {"lane0_accumulators_sha256": digest(out.accumulators[0])}

    return BenchmarkDescriptor(
        name="maxflops", level=0, domain="arithmetic",
        description="peak multiply-add throughput from independent accumulator chains",
        presets=_classes(iters=(2_000_000, 8_000_000, 32_000_000, 128_000_000), precision="f32"),
        params={"iters": _int(1, 1 << 40), "precision": _choice("f16", "f32", "f64")},
        setup=lambda p, rng: None,
        compute=lambda s, p: level0.max_flops(p["precision"], _lanes(), p["iters"]),
        verify=verify,
        metrics=lambda p, out, s: {"gflops": out.gflops},
        notes=lambda p: (["f16 stored as binary16 bit patterns with software conversion; "
                          "arithmetic in f32 then rounded to nearest even"]
                         if p["precision"] == "f16" else []))


# --------------------------------------------------------------------------
# Level 1
# --------------------------------------------------------------------------

def _gups() -> BenchmarkDescriptor:
    def updates(p):
        return 4 << p["table_log2"] if p["updates"] < 0 else p["updates"]

    def setup(p, rng):
        return {"table": level1.gups_table(p["table_log2"]), "seed": int(rng.integers(0, 2 ** 63))}

    def verify(s, out, p):
        ref = level1.gups_reference(s["table"].copy(), updates(p), s["seed"])
        return bool(np.array_equal(out, ref)), {"table_sha256": digest(out)}

    return BenchmarkDescriptor(
        name="gups", level=1, dwarf="random access", domain="memory",
        description="XOR updates to random locations of a power-of-two table",
        presets=_classes(table_log2=(20, 22, 24, 26), updates=-1),
        params={"table_log2": _int(1, 40), "updates": _int(-1, None, "-1 means 4x the table size")},
        setup=setup, stage=lambda s: {**s, "work": s["table"].copy()},
        compute=lambda s, p: level1.gups(s["work"], updates(p), s["seed"]),
        verify=verify,
        metrics=lambda p, out, sec: {"gups": updates(p) / sec / 1e9},
        footprint=lambda p: 3 * 8 << p["table_log2"])


def _bfs() -> BenchmarkDescriptor:
    def setup(p, rng):
        if p["source"] >= p["n"]:
            raise ValueError("source must be a vertex of the graph")
        return level1.random_graph(p["n"], p["degree"], rng)

    def verify(g, out, p):
        ref = level1.bfs_reference(g, p["source"])
        reached = int((out != level1.UNREACHABLE).sum())
        return bool(np.array_equal(out, ref)), {"distances_sha256": digest(out), "reached": reached,
                                                "max_depth": int(out.max())}

    return BenchmarkDescriptor(
        name="bfs", level=1, dwarf="graph traversal", domain="graphs",
        description="level-synchronous breadth-first search on a uniform random graph",
        presets=_classes(n=(1 << 16, 1 << 18, 1 << 20, 1 << 22), degree=16, source=0),
        params={"n": _int(1, 1 << 31), "degree": _int(0, 1 << 12), "source": _int(0)},
        setup=setup, compute=lambda g, p: level1.bfs(g, p["source"]), verify=verify,
        metrics=lambda p, out, sec: {"mteps": p["n"] * p["degree"] / sec / 1e6},
        footprint=lambda p: p["n"] * (p["degree"] * 4 + 32))


def _gemm() -> BenchmarkDescriptor:
    def dtype(p):
        return np.float32 if p["precision"] == "f32" else np.float64

    def setup(p, rng):
        n, dt = p["n"], dtype(p)
        return {"a": rng.standard_normal((n, n)).astype(dt),
                "b": rng.standard_normal((n, n)).astype(dt),
                "c": rng.standard_normal((n, n)).astype(dt), "rows_seed": int(rng.integers(2 ** 63))}

    def compute(s, p):
        return level1.gemm(s["a"], s["b"], s["work"], p["alpha"], p["beta"], p["ta"], p["tb"])

    def verify(s, out, p):
        a, b, c = s["a"], s["b"], s["c"]
        if p["n"] <= 512:
            ref = level1.gemm_reference(a, b, c, p["alpha"], p["beta"], p["ta"], p["tb"])
            got, checked = out, "all"
        else:
            # triple-loop cost grows as n^3; check a seeded sample of rows in float64
            rows = np.sort(np.random.default_rng(s["rows_seed"]).choice(p["n"], 64, replace=False))
            opa = (a.T if p["ta"] else a)[rows].astype(np.float64)
            opb = (b.T if p["tb"] else b).astype(np.float64)
            ref = p["alpha"] * (opa @ opb) + p["beta"] * c[rows].astype(np.float64)
            got, checked = out[rows], "64 sampled rows"
        err = level1.relative_frobenius(got, ref)
        tol = 1e-4 if p["precision"] == "f32" else 1e-10
        return err <= tol, {"relative_frobenius": err, "tolerance": tol, "checked": checked,
                            "c_sha256": digest(out)}

    return BenchmarkDescriptor(
        name="gemm", level=1, dwarf="dense linear algebra", domain="linear algebra",
        description="blocked C <- alpha op(A) op(B) + beta C",
        presets=_classes(n=(256, 512, 1024, 2048), precision="f32", ta=False, tb=False,
                         alpha=1.0, beta=0.5),
        params={"n": _int(1, 1 << 16), "precision": _choice("f32", "f64"),
                "ta": Param(bool), "tb": Param(bool), "alpha": Param(float), "beta": Param(float)},
        setup=setup, stage=lambda s: {**s, "work": s["c"].copy()}, compute=compute, verify=verify,
        metrics=lambda p, out, sec: {"gflops": 2.0 * p["n"] ** 3 / sec / 1e9},
        footprint=lambda p: 5 * p["n"] ** 2 * (4 if p["precision"] == "f32" else 8))


def _pathfinder_dp(cost: np.ndarray) -> int:
    prev = cost[0].astype(np.int64)
    for row in cost[1:]:
        left = np.concatenate([prev[:1], prev[:-1]])
        right = np.concatenate([prev[1:], prev[-1:]])
        prev = row + np.minimum(np.minimum(left, prev), right)
    return int(prev.min())


def _pathfinder() -> BenchmarkDescriptor:
    def verify(cost, out, p):
        ref = _pathfinder_dp(cost)
        return out == ref, {"min_cost": int(out)}

    return BenchmarkDescriptor(
        name="pathfinder", level=1, dwarf="dynamic programming", domain="grid traversal",
        description="row-by-row minimum-cost path through an integer grid",
        presets=_classes(rows=(1000, 2000, 4000, 8000), cols=(1000, 2000, 4000, 8000)),
        params={"rows": _int(1, 1 << 20), "cols": _int(1, 1 << 20)},
        setup=lambda p, rng: rng.integers(0, 10, size=(p["rows"], p["cols"]), dtype=np.int32),
        compute=lambda cost, p: level1.pathfinder(cost),
        compute_instance=lambda cost, p: level1.pathfinder(cost, serial=True),
        verify=verify,
        metrics=lambda p, out, sec: {"mcells_per_sec": p["rows"] * p["cols"] / sec / 1e6},
        footprint=lambda p: 8 * p["rows"] * p["cols"])


def _sort() -> BenchmarkDescriptor:
    def setup(p, rng):
        n = p["n"]
        if p["precision"] == "f32":
            keys = rng.standard_normal(n).astype(np.float32)
            # exercise signed zeros and duplicate keys
            keys[rng.integers(0, n, size=max(1, n // 1000))] = 0.0
            keys[rng.integers(0, n, size=max(1, n // 1000))] = -0.0
        else:
            keys = rng.integers(0, 2 ** 32, size=n, dtype=np.uint32)
        return keys, np.arange(n, dtype=np.uint32)

    def verify(s, out, p):
        rk, rv = level1.sort_reference(*s)
        k, v = out
        ok = np.array_equal(k.view(np.uint32), rk.view(np.uint32)) and np.array_equal(v, rv)
        return bool(ok), {"values_sha256": digest(v)}

    return BenchmarkDescriptor(
        name="sort", level=1, dwarf="sorting", domain="data processing",
        description="LSD radix sort of key-value pairs, 8-bit digits",
        presets=_classes(n=(1 << 20, 1 << 22, 1 << 24, 1 << 26), precision="f32"),
        params={"n": _int(0, 1 << 32), "precision": _choice("f32", "u32")},
        setup=setup, compute=lambda s, p: level1.radix_sort(*s), verify=verify,
        metrics=lambda p, out, sec: {"mkeys_per_sec": p["n"] / sec / 1e6},
        footprint=lambda p: 32 * p["n"])


# --------------------------------------------------------------------------
# Level 2
# --------------------------------------------------------------------------

def _dwt2d() -> BenchmarkDescriptor:
    def setup(p, rng):
        shape = (p["height"], p["width"])
        if p["variant"] == "int_5_3":
            image = rng.integers(0, 256, size=shape, dtype=np.int32)
        else:
            image = rng.random(shape, dtype=np.float32) * 255
        coeffs = dwt.dwt2d(image, p["variant"], "forward", p["levels"])
        return {"image": image, "coeffs": coeffs}

    def compute(s, p):
        src = s["image"] if p["direction"] == "forward" else s["coeffs"]
        return dwt.dwt2d(src, p["variant"], p["direction"], p["levels"])

    def verify(s, out, p):
        back = out if p["direction"] == "inverse" else dwt.dwt2d(out, p["variant"], "inverse", p["levels"])
        err = float(np.abs(back.astype(np.float64) - s["image"]).max())
        tol = 0.0 if p["variant"] == "int_5_3" else 1e-4
        return err <= tol, {"round_trip_max_abs_error": err, "tolerance": tol,
                            "output_sha256": digest(out)}

    return BenchmarkDescriptor(
        name="dwt2d", level=2, dwarf="spectral methods", domain="image compression",
        description="multi-level 2-D lifting wavelet transform (5/3 integer, 9/7 float)",
        presets=_classes(width=(512, 1024, 2048, 4096), height=(512, 1024, 2048, 4096),
                         levels=3, variant="float_9_7", direction="forward"),
        params={"width": _int(2, 1 << 16), "height": _int(2, 1 << 16), "levels": _int(1, 16),
                "variant": _choice(*dwt.VARIANTS), "direction": _choice("forward", "inverse")},
        setup=setup, compute=compute, verify=verify,
        metrics=lambda p, out, sec: {"mpixels_per_sec": p["width"] * p["height"] / sec / 1e6},
        footprint=lambda p: 24 * p["width"] * p["height"])


def _kmeans() -> BenchmarkDescriptor:
    def setup(p, rng):
        if p["k"] > p["n"]:
            raise ValueError(f"k={p['k']} exceeds n={p['n']}")
        truth = rng.uniform(-10, 10, size=(p["k"], p["d"]))
        pts = truth[rng.integers(0, p["k"], size=p["n"])] + rng.standard_normal((p["n"], p["d"]))
        return pts, kmeans.initial_centers(pts, p["k"], rng)

    def verify(s, out, p):
        centers, labels, iters = out
        rc, rl, ri = kmeans.kmeans_reference(s[0], s[1], p["iters"])
        ok = iters == ri and np.array_equal(labels, rl) and np.allclose(centers, rc, rtol=1e-9, atol=1e-12)
        return bool(ok), {"iterations": int(iters), "labels_sha256": digest(labels)}

    return BenchmarkDescriptor(
        name="kmeans", level=2, dwarf="dense linear algebra", domain="data mining",
        description="Lloyd's iteration with parallel assignment and chunked mean update",
        presets=_classes(n=(16384, 65536, 262144, 1048576), d=8, k=16, iters=20),
        params={"n": _int(1, 1 << 32), "d": _int(1, 1024), "k": _int(1, 1 << 16),
                "iters": _int(1, 1 << 20)},
        setup=setup, compute=lambda s, p: kmeans.kmeans(s[0], s[1], p["iters"]), verify=verify,
        metrics=lambda p, out, sec: {"mpoints_per_sec": p["n"] * out[2] / sec / 1e6},
        footprint=lambda p: 8 * p["n"] * (p["d"] * 3 + 2))


def _lavamd() -> BenchmarkDescriptor:
    def pair_evaluations(p):
        return (3 * p["boxes"] - 2) ** 3 * p["ppb"] ** 2

    def setup(p, rng):
        space = lavamd.random_space(p["boxes"], p["ppb"], rng, cutoff=p["cutoff"])
        n = space.positions.shape[0]
        return space, np.sort(rng.choice(n, size=min(256, n), replace=False))

    def verify(s, out, p):
        space, subset = s
        ref = lavamd.lavamd_reference(space, subset)
        err = float(np.abs(out[subset] - ref).max() / max(np.abs(ref).max(), 1e-300))
        return err <= 1e-10, {"sampled_particles": int(subset.size), "relative_error": err,
                              "output_sha256": digest(out)}

    return BenchmarkDescriptor(
        name="lavamd", level=2, dwarf="n-body", domain="molecular dynamics",
        description="cutoff pair interactions over home and neighbor boxes",
        presets=_classes(boxes=(4, 6, 10, 16), ppb=100, cutoff=1.0),
        params={"boxes": _int(1, 512), "ppb": _int(1, 1 << 16),
                "cutoff": Param(float, 1e-9, 1.0, help="fraction of the box edge")},
        setup=setup, compute=lambda s, p: lavamd.lavamd(s[0]), verify=verify,
        metrics=lambda p, out, sec: {"mpairs_per_sec": pair_evaluations(p) / sec / 1e6},
        footprint=lambda p: 72 * p["boxes"] ** 3 * p["ppb"])


def _mandelbrot() -> BenchmarkDescriptor:
    def escape(p):
        return mandelbrot.mandelbrot_escape(mandelbrot.STANDARD_VIEW, p["width"], p["height"], p["max_iter"])

    def compute(s, p):
        if p["algorithm"] == "escape":
            return escape(p)
        return mandelbrot.mandelbrot_mariani_silver(mandelbrot.STANDARD_VIEW, p["width"], p["height"],
                                                    p["max_iter"], p["min_tile"])

    def verify(s, out, p):
        agree = mandelbrot.agreement(out, escape(p))
        total = p["width"] * p["height"]
        ok = agree >= 0.999 and out.pixels_iterated <= total
        return ok, {"agreement": agree, "pixels_iterated": out.pixels_iterated,
                    "iterated_fraction": out.pixels_iterated / total, "dwell_sha256": digest(out.dwell)}

    return BenchmarkDescriptor(
        name="mandelbrot", level=2, dwarf="structured grid", domain="fractals",
        description="Mariani-Silver border subdivision against per-pixel escape time",
        presets=_classes(width=(512, 1024, 2048, 4096), height=(512, 1024, 2048, 4096),
                         max_iter=(256, 512, 1024, 2048), min_tile=16, algorithm="mariani_silver"),
        params={"width": _int(1, 1 << 16), "height": _int(1, 1 << 16), "max_iter": _int(1, 1 << 24),
                "min_tile": _int(2, 1 << 16), "algorithm": _choice("mariani_silver", "escape")},
        setup=lambda p, rng: None, compute=compute, verify=verify,
        baseline=lambda s, p: escape(p),
        metrics=lambda p, out, sec: {"mpixels_per_sec": p["width"] * p["height"] / sec / 1e6,
                                     "iterated_fraction": out.pixels_iterated / (p["width"] * p["height"])},
        footprint=lambda p: 12 * p["width"] * p["height"])


def _needleman_wunsch() -> BenchmarkDescriptor:
    def setup(p, rng):
        return nw.SequencePair(rng.integers(0, p["alphabet"], size=p["len_a"], dtype=np.int32),
                               rng.integers(0, p["alphabet"], size=p["len_b"], dtype=np.int32),
                               nw.default_similarity(p["alphabet"]), p["gap"])

    def verify(pair, al, p):
        ref = nw.reference_matrix(pair)
        traced = nw.alignment_score(al.a, al.b, pair.similarity, pair.gap_penalty)
        ok = (np.array_equal(al.matrix, ref) and al.score == ref[-1, -1] == traced
              and np.array_equal(al.a[al.a != nw.GAP], pair.a)
              and np.array_equal(al.b[al.b != nw.GAP], pair.b))
        return bool(ok), {"score": int(al.score), "alignment_length": int(al.a.size)}

    return BenchmarkDescriptor(
        name="needleman-wunsch", level=2, dwarf="dynamic programming", domain="bioinformatics",
        description="global alignment by anti-diagonal wavefront fill and traceback",
        presets=_classes(len_a=(1024, 2048, 4096, 8192), len_b=(1024, 2048, 4096, 8192),
                         gap=-1, alphabet=24),
        params={"len_a": _int(1, 1 << 17), "len_b": _int(1, 1 << 17), "gap": _int(None, 0),
                "alphabet": _int(1, 1 << 15)},
        setup=setup, compute=lambda pair, p: nw.needleman_wunsch(pair), verify=verify,
        metrics=lambda p, out, sec: {"mcups": p["len_a"] * p["len_b"] / sec / 1e6},
        footprint=lambda p: 12 * (p["len_a"] + 1) * (p["len_b"] + 1))


def _srad() -> BenchmarkDescriptor:
    def setup(p, rng):
        h, w = p["height"], p["width"]
        yy, xx = np.mgrid[0:h, 0:w]
        scene = 1.0 + ((xx // max(1, w // 8) + yy // max(1, h // 8)) % 2)
        # multiplicative speckle
        return (scene * rng.gamma(4.0, 0.25, size=(h, w))).astype(np.float32)

    def verify(img, out, p):
        ref = srad.srad_reference(img, p["lambda"], p["iters"])
        return bool(np.array_equal(out, ref)), {"output_sha256": digest(out),
                                               "variance_before": float(img.var(dtype=np.float64)),
                                               "variance_after": float(out.var(dtype=np.float64))}

    return BenchmarkDescriptor(
        name="srad", level=2, dwarf="structured grid", domain="image processing",
        description="speckle-reducing anisotropic diffusion with a barrier between phases",
        presets=_classes(width=(512, 1024, 2048, 4096), height=(512, 1024, 2048, 4096),
                         iters=10, **{"lambda": 0.5}),
        params={"width": _int(3, 1 << 16), "height": _int(3, 1 << 16), "iters": _int(1, 1 << 20),
                "lambda": Param(float, 1e-12, 1.0)},
        setup=setup, compute=lambda img, p: srad.srad(img, p["lambda"], p["iters"]), verify=verify,
        metrics=lambda p, out, sec: {"mpixels_per_sec": p["width"] * p["height"] * p["iters"] / sec / 1e6},
        footprint=lambda p: 48 * p["width"] * p["height"])


def _where() -> BenchmarkDescriptor:
    def predicate(p):
        return where.Predicate((("col0", "<", p["threshold"]),))

    def verify(table, out, p):
        ref = where.where_reference(table, predicate(p))
        ok = all(np.array_equal(out[c], ref[c]) for c in table)
        return bool(ok), {"selected": int(len(out["col0"])), "col0_sha256": digest(out["col0"])}

    return BenchmarkDescriptor(
        name="where", level=2, dwarf="map-scan-scatter", domain="databases",
        description="record filter by flag map, exclusive prefix sum and scatter",
        presets=_classes(n=(1 << 20, 1 << 22, 1 << 24, 1 << 26), columns=4, threshold=500),
        params={"n": _int(0, 1 << 32), "columns": _int(1, 64), "threshold": _int(None, None)},
        setup=lambda p, rng: where.random_table(p["n"], p["columns"], rng),
        compute=lambda table, p: where.where_filter(table, predicate(p)), verify=verify,
        metrics=lambda p, out, sec: {"mrecords_per_sec": p["n"] / sec / 1e6},
        footprint=lambda p: p["n"] * (4 * p["columns"] * 2 + 24))


# --------------------------------------------------------------------------
# DNN layers
# --------------------------------------------------------------------------

_PASSES = ("forward", "backward", "both")
_BATCH = (16, 32, 64, 128)


def _close(got, ref, dtype) -> float:
    ref = np.asarray(ref, dtype=np.float64)
    scale = max(float(np.abs(ref).max()), 1e-300)
    return float(np.abs(np.asarray(got, dtype=np.float64) - ref).max() / scale)


def _layer(name: str, description: str, shape, build, forward, backward, ref_forward,
           ref_backward, extra_params=None, extra_presets=None, flops=None) -> BenchmarkDescriptor:
    """Descriptor for one layer.

    ``build(x, rng, dtype, p)`` returns layer parameters; ``forward(st)`` and
    ``backward(st)`` run the kernels on state ``st`` (keys x, dy, y, params);
    the ``ref_*`` callables are the numpy oracles on the same state.
    ``flops(p)`` gives forward FLOPs when a GFLOPS figure is meaningful;
    backward is counted as twice the forward work.
    """
    def setup(p, rng):
        dtype = np.float32 if p["precision"] == "f32" else np.float64
        x = rng.standard_normal(shape(p)).astype(dtype)
        st = {"x": x, "params": build(x, rng, dtype, p)}
        st["y"] = forward(st)
        st["dy"] = rng.standard_normal(st["y"].shape).astype(dtype)
        return st

    def compute(st, p):
        out = {}
        if p["pass"] in ("forward", "both"):
            out["y"] = forward(st)
        if p["pass"] in ("backward", "both"):
            out["grads"] = tuple(backward(st))
        return out

    def verify(st, out, p):
        tol = 1e-4 if p["precision"] == "f32" else 1e-10
        errs, art = [], {}
        if "y" in out:
            errs.append(_close(out["y"], ref_forward(st), st["x"].dtype))
            art["y_sha256"] = digest(out["y"])
        if "grads" in out:
            refs = ref_backward(st)
            errs += [_close(g, r, st["x"].dtype) for g, r in zip(out["grads"], refs)]
            art["grads_sha256"] = digest(*out["grads"])
        fd = run_probe(name)
        art.update(oracle_relative_error=max(errs), tolerance=tol, finite_difference_error=fd)
        ok = max(errs) <= tol and fd <= RTOL and all(
            np.isfinite(v).all() for v in [out.get("y", 0.0), *out.get("grads", ())])
        return bool(ok), art

    def work(p):
        return float(np.prod(shape(p)))

    def metrics(p, out, sec):
        m = {"melements_per_sec": work(p) / sec / 1e6}
        if flops is not None:
            factor = {"forward": 1, "backward": 2, "both": 3}[p["pass"]]
            m["gflops"] = factor * flops(p) / sec / 1e9
        return m

    return BenchmarkDescriptor(
        name=f"dnn-{name}", level=2, dwarf="dense linear algebra", domain="deep learning",
        description=description,
        presets=_classes(batch=_BATCH, precision="f32", **{"pass": "both"}, **(extra_presets or {})),
        params={"batch": _int(1, 1 << 16), "precision": _choice("f32", "f64"),
                "pass": _choice(*_PASSES), **(extra_params or {})},
        setup=setup, compute=compute, verify=verify,
        metrics=metrics, footprint=lambda p: 64 * int(work(p)))


def _dnn_layers() -> list[BenchmarkDescriptor]:
    def bn_build(x, rng, dt, p):
        c = x.shape[1]
        return L.BatchNormState((1 + 0.1 * rng.standard_normal(c)).astype(dt),
                                (0.1 * rng.standard_normal(c)).astype(dt))

    def conv_build(x, rng, dt, p):
        c = x.shape[1]
        return L.ConvParams((rng.standard_normal((p["filters"], c, 3, 3)) / np.sqrt(9 * c)).astype(dt),
                            (0.1 * rng.standard_normal(p["filters"])).astype(dt))

    def fc_build(x, rng, dt, p):
        return ((rng.standard_normal((p["inputs"], p["outputs"])) / np.sqrt(p["inputs"])).astype(dt),
                (0.1 * rng.standard_normal(p["outputs"])).astype(dt))

    def drop_build(x, rng, dt, p):
        return {"keep": p["keep_prob"], "seed": int(rng.integers(0, 2 ** 63))}

    def drop_fwd(st):
        y, st["mask"] = L.dropout_forward(st["x"], st["params"]["keep"], st["params"]["seed"])
        return y

    def drop_ref(st):
        pr = st["params"]
        keep = R.dropout_keep(st["x"].size, pr["keep"], pr["seed"]).reshape(st["x"].shape)
        return np.where(keep, st["x"].astype(np.float64) / pr["keep"], 0.0)

    def drop_ref_bwd(st):
        pr = st["params"]
        keep = R.dropout_keep(st["x"].size, pr["keep"], pr["seed"]).reshape(st["x"].shape)
        return (np.where(keep, st["dy"].astype(np.float64) / pr["keep"], 0.0),)

    lrn = L.LrnParams()

    def none(x, rng, dt, p):
        return None

    return [
        _layer("activation", "ReLU forward and backward",
               lambda p: (p["batch"], 64, 56, 56), none,
               lambda st: L.relu_forward(st["x"]),
               lambda st: (L.relu_backward(st["x"], st["dy"]),),
               lambda st: R.relu(st["x"]), lambda st: (R.relu_grad(st["x"], st["dy"]),)),
        _layer("pooling", "2x2 average pooling forward and backward",
               lambda p: (p["batch"], 16, 112, 112), none,
               lambda st: L.avgpool_forward(st["x"], 2),
               lambda st: (L.avgpool_backward(st["x"], st["dy"], 2),),
               lambda st: R.avgpool(st["x"], 2), lambda st: (R.avgpool_grad(st["x"], st["dy"], 2),)),
        _layer("batchnorm", "training-mode batch normalization forward and backward",
               lambda p: (p["batch"], 32, 56, 56), bn_build,
               lambda st: L.batchnorm_forward(st["x"], st["params"]),
               lambda st: L.batchnorm_backward(st["x"], st["dy"], st["params"]),
               lambda st: R.batchnorm(st["x"], st["params"].gamma, st["params"].beta, st["params"].epsilon),
               lambda st: R.batchnorm_grad(st["x"], st["dy"], st["params"].gamma, st["params"].epsilon)),
        _layer("connected", "fully connected layer on the blocked GEMM",
               lambda p: (p["batch"], p["inputs"]), fc_build,
               lambda st: L.connected_forward(st["x"], *st["params"]),
               lambda st: L.connected_backward(st["x"], st["params"][0], st["dy"]),
               lambda st: R.connected(st["x"], *st["params"]),
               lambda st: R.connected_grad(st["x"], st["params"][0], st["dy"]),
               extra_params={"inputs": _int(1, 1 << 20), "outputs": _int(1, 1 << 20)},
               extra_presets={"inputs": 4096, "outputs": 1024},
               flops=lambda p: 2.0 * p["batch"] * p["inputs"] * p["outputs"]),
        _layer("convolution", "direct 3x3 convolution forward and backward",
               lambda p: (p["batch"], 3, 112, 112), conv_build,
               lambda st: L.conv_forward(st["x"], st["params"]),
               lambda st: L.conv_backward(st["x"], st["dy"], st["params"]),
               lambda st: R.conv(st["x"], st["params"].weights, st["params"].bias),
               lambda st: R.conv_grad(st["x"], st["params"].weights, st["dy"]),
               extra_params={"filters": _int(1, 4096)}, extra_presets={"filters": 16},
               flops=lambda p: 2.0 * p["batch"] * p["filters"] * 110 * 110 * 3 * 9),
        _layer("dropout", "inverted dropout with counter-based masks",
               lambda p: (p["batch"], 64, 56, 56), drop_build, drop_fwd,
               lambda st: (L.dropout_backward(st["dy"], st["mask"]),),
               drop_ref, drop_ref_bwd,
               extra_params={"keep_prob": Param(float, 1e-9, 1.0)}, extra_presets={"keep_prob": 0.5}),
        _layer("softmax", "channel-wise softmax forward and backward",
               lambda p: (p["batch"], 100, 28, 28), none,
               lambda st: L.softmax_forward(st["x"]),
               lambda st: (L.softmax_backward(st["y"], st["dy"]),),
               lambda st: R.softmax(st["x"]), lambda st: (R.softmax_grad(st["y"], st["dy"]),)),
        _layer("lrn", "cross-channel local response normalization forward and backward",
               lambda p: (p["batch"], 64, 28, 28), none,
               lambda st: L.lrn_forward(st["x"], lrn),
               lambda st: (L.lrn_backward(st["x"], st["dy"], lrn),),
               lambda st: R.lrn(st["x"], lrn.n_neighborhood, lrn.k, lrn.alpha, lrn.beta),
               lambda st: (R.lrn_grad(st["x"], st["dy"], lrn.n_neighborhood, lrn.k, lrn.alpha, lrn.beta),)),
    ]


def _composite_reference_probs(net: C.CompositeNet, x: np.ndarray) -> np.ndarray:
    h = R.conv(x, net.conv.weights, net.conv.bias, net.conv.stride, net.conv.padding)
    h = R.avgpool(R.relu(h), net.pool)
    h = R.batchnorm(h, net.bn.gamma, net.bn.beta, net.bn.epsilon)
    z = R.connected(h.reshape(x.shape[0], -1), net.fc_weight, net.fc_bias)
    return R.softmax(z[:, :, None, None])[:, :, 0, 0]


def _dnn_composite() -> BenchmarkDescriptor:
    def setup(p, rng):
        dtype = np.float32 if p["precision"] == "f32" else np.float64
        net = C.CompositeNet.create((3, 32, 32), p["classes"], rng, dtype=dtype)
        x = rng.standard_normal((p["batch"], 3, 32, 32)).astype(dtype)
        return {"net": net, "x": x, "labels": rng.integers(0, p["classes"], size=p["batch"])}

    def compute(st, p):
        if p["pass"] == "forward":
            timings: dict = {}
            probs, _ = C.forward(st["net"], st["x"], timings)
            return C.CompositeResult(C.cross_entropy(probs, st["labels"]), probs, {}, timings)
        return C.forward_backward(st["net"], st["x"], st["labels"])

    def verify(st, res, p):
        tol = 1e-4 if p["precision"] == "f32" else 1e-10
        ref = _composite_reference_probs(st["net"], st["x"])
        err = _close(res.probs, ref, st["x"].dtype)
        fd = run_probe("composite")
        ok = (np.isfinite(res.loss) and res.loss >= 0 and err <= tol and fd <= RTOL
              and all(np.isfinite(g).all() for g in res.grads.values()))
        return bool(ok), {"loss": float(res.loss), "probs_relative_error": err,
                          "finite_difference_error": fd, "probs_sha256": digest(res.probs)}

    def metrics(p, res, sec):
        m = {"images_per_sec": p["batch"] / sec}
        m.update({f"{k}_seconds": v for k, v in res.layer_seconds.items()})
        return m

    return BenchmarkDescriptor(
        name="dnn-composite", level=2, dwarf="dense linear algebra", domain="deep learning",
        description="conv-relu-pool-batchnorm-connected-softmax network with cross-entropy loss",
        presets=_classes(batch=_BATCH, precision="f32", classes=10, **{"pass": "both"}),
        params={"batch": _int(1, 1 << 16), "precision": _choice("f32", "f64"),
                "pass": _choice(*_PASSES), "classes": _int(2, 1 << 16)},
        setup=setup, compute=compute, verify=verify, metrics=metrics,
        footprint=lambda p: 64 * 8 * 30 * 30 * p["batch"] * 4,
        notes=lambda p: ["pass=backward runs the forward pass too; backward layer times are "
                         "reported as separate *_backward_seconds metrics"]
        if p["pass"] == "backward" else [])


def build_registry() -> Registry:
    reg = Registry()
    for d in [
        _busspeed("a_to_b", "busspeed-download", "copy bandwidth sweep, buffer A to buffer B"),
        _busspeed("b_to_a", "busspeed-readback", "copy bandwidth sweep, buffer B to buffer A"),
        _devicememory(), _maxflops(),
        _gups(), _bfs(), _gemm(), _pathfinder(), _sort(),
        _dwt2d(), _kmeans(), _lavamd(), _mandelbrot(), _needleman_wunsch(), _srad(), _where(),
        *_dnn_layers(), _dnn_composite(),
    ]:
        reg.register(d)
    return reg
