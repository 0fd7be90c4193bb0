"""Selectable-backend numeric kernels.

Two backends implement the same operation set: ``scalar`` is compiled with
auto-vectorization disabled and ``vector`` with full host-CPU optimization,
so the difference between them isolates data-level (SIMD) parallelism on
one code base. The shared C source ships with the package and is compiled
on first use into a per-user cache keyed by source hash, compiler, and
flags. Foreign calls release the GIL, so worker threads driving these
kernels run in parallel.

All kernel inputs and outputs are float32; lengths must match or a
ValueError is raised.
"""

from __future__ import annotations

import ctypes
import enum
import hashlib
import os
import shutil
import subprocess
import tempfile
from pathlib import Path

import numpy as np

_SOURCE = Path(__file__).parent / "_native" / "kernels.c"

# -fno-math-errno lets sqrtf compile to the hardware instruction in both
# builds; it does not license any reassociation, so each backend's
# accumulation order stays fixed.
_COMMON_FLAGS = ["-std=c11", "-fPIC", "-shared", "-Wall", "-fno-math-errno"]
_SCALAR_FLAGS = [
    "-O2",
    "-fno-tree-vectorize",
    "-fno-tree-slp-vectorize",
    "-ffp-contract=off",
]
_VECTOR_FLAGS = ["-O3", "-march=native", "-funroll-loops"]


class Backend(enum.Enum):
    SCALAR = "scalar"
    VECTORIZED = "vector"


def _cache_dir() -> Path:
    root = os.environ.get("KGEBENCH_CACHE")
    if root:
        return Path(root)
    return Path.home() / ".cache" / "kgebench"


def _compiler() -> str:
    for cand in (os.environ.get("CC"), "cc", "gcc", "clang"):
        if cand and shutil.which(cand):
            return cand
    raise EnvironmentError(
        "no C compiler found (tried $CC, cc, gcc, clang); "
        "the kernel backends require one at first use"
    )


def _build(backend: Backend) -> Path:
    cc = _compiler()
    flags = _SCALAR_FLAGS if backend is Backend.SCALAR else _VECTOR_FLAGS
    source = _SOURCE.read_bytes()
    key = hashlib.sha256(
        source + cc.encode() + " ".join(_COMMON_FLAGS + flags).encode()
    ).hexdigest()[:16]
    cache = _cache_dir()
    cache.mkdir(parents=True, exist_ok=True)
    lib_path = cache / f"libkgeb_{backend.value}_{key}.so"
    if lib_path.exists():
        return lib_path

    with tempfile.TemporaryDirectory(dir=cache) as tmp:
        tmp_out = Path(tmp) / lib_path.name
        cmd = [cc, *_COMMON_FLAGS, *flags, "-o", str(tmp_out), str(_SOURCE), "-lm", "-lpthread"]
        proc = subprocess.run(cmd, capture_output=True, text=True)
        if proc.returncode != 0:
            raise EnvironmentError(
                f"kernel build failed ({' '.join(cmd)}):\n{proc.stderr}"
            )
        os.replace(tmp_out, lib_path)  # atomic under concurrent builds
    return lib_path


_f32p = np.ctypeslib.ndpointer(dtype=np.float32, flags="C_CONTIGUOUS")
_i32p = np.ctypeslib.ndpointer(dtype=np.int32, flags="C_CONTIGUOUS")
_i64 = ctypes.c_int64
_f32 = ctypes.c_float
_f64 = ctypes.c_double


class TrainWorkspace(ctypes.Structure):
    """Mirror of the native per-run training workspace descriptor."""

    _fields_ = [
        ("ent_ids", ctypes.c_void_p),
        ("cap_ent", _i64),
        ("rel_ids", ctypes.c_void_p),
        ("cap_rel", _i64),
        ("ent_grads", ctypes.c_void_p),
        ("rel_grads", ctypes.c_void_p),
        ("shared_grads", ctypes.c_void_p),
        ("scratch", ctypes.c_void_p),
        ("ent_bits", ctypes.c_void_p),
        ("rel_bits", ctypes.c_void_p),
        ("ent_map", ctypes.c_void_p),
        ("rel_map", ctypes.c_void_p),
        ("merged", ctypes.c_void_p),
    ]


def _bind(lib: ctypes.CDLL) -> ctypes.CDLL:
    lib.kgeb_dot.restype = _f32
    lib.kgeb_dot.argtypes = [_f32p, _f32p, _i64]
    lib.kgeb_trilinear.restype = _f32
    lib.kgeb_trilinear.argtypes = [_f32p, _f32p, _f32p, _i64]
    lib.kgeb_l1_dist.restype = _f32
    lib.kgeb_l1_dist.argtypes = [_f32p, _f32p, _i64]
    lib.kgeb_l2_dist.restype = _f32
    lib.kgeb_l2_dist.argtypes = [_f32p, _f32p, _i64]
    lib.kgeb_axpy.restype = None
    lib.kgeb_axpy.argtypes = [_f32, _f32p, _f32p, _f32p, _i64]
    lib.kgeb_relu.restype = None
    lib.kgeb_relu.argtypes = [_f32p, _f32p, _i64]
    lib.kgeb_conv3_rows.restype = None
    lib.kgeb_conv3_rows.argtypes = [_f32p, _f32p, _f32p, _i64, _f32p, _i64, _f32p]
    lib.kgeb_bench_dot.restype = _f64
    lib.kgeb_bench_dot.argtypes = [_f32p, _i64, _f32p, _i64, _i64,
                                   ctypes.POINTER(_f64)]
    lib.kgeb_spin.restype = _f64
    lib.kgeb_spin.argtypes = [_f64]
    lib.kgeb_score_batch.restype = ctypes.c_int
    lib.kgeb_score_batch.argtypes = [
        ctypes.c_int, _f32p, _f32p, _i64, _f32p, _i64, _f32p,
        _i32p, _i64, ctypes.c_int, _f32p,
    ]
    lib.kgeb_train_batch.restype = ctypes.c_int
    lib.kgeb_train_batch.argtypes = [
        ctypes.c_int,               # model
        _f32p, _i64,                # ent, n_ent
        _f32p, _i64,                # rel, n_rel
        _i64,                       # d
        _f32p, _f32p, _i64,         # filters, w, tau
        _f32p, _f32p, _f32p,        # mom_ent, mom_rel, mom_shared
        _i32p, _i64,                # pos, n_pos
        _i32p, _i64,                # neg, eta
        _f32, _f32,                 # margin, inv_batch
        ctypes.c_int,               # threads
        _i64, _f32, _f32, _f32, _f32,  # adam_t, lr, beta1, beta2, eps
        ctypes.c_int,               # normalize_entities
        ctypes.POINTER(TrainWorkspace),
        ctypes.POINTER(_f64),       # loss_out
    ]
    return lib


_libs: dict[Backend, ctypes.CDLL] = {}


def native_lib(backend: Backend) -> ctypes.CDLL:
    """Return the loaded shared library for ``backend``, building if needed."""
    lib = _libs.get(backend)
    if lib is None:
        lib = _bind(ctypes.CDLL(str(_build(backend))))
        _libs[backend] = lib
    return lib


def _as_f32(x, name: str) -> np.ndarray:
    arr = np.ascontiguousarray(x, dtype=np.float32)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    return arr


def _check_same_length(*arrays: np.ndarray) -> int:
    n = len(arrays[0])
    for a in arrays[1:]:
        if len(a) != n:
            raise ValueError(f"length mismatch: {[len(x) for x in arrays]}")
    return n


def dot(a, b, backend: Backend = Backend.VECTORIZED) -> float:
    a, b = _as_f32(a, "a"), _as_f32(b, "b")
    n = _check_same_length(a, b)
    return float(native_lib(backend).kgeb_dot(a, b, n))


def trilinear(h, r, t, backend: Backend = Backend.VECTORIZED) -> float:
    h, r, t = _as_f32(h, "h"), _as_f32(r, "r"), _as_f32(t, "t")
    n = _check_same_length(h, r, t)
    return float(native_lib(backend).kgeb_trilinear(h, r, t, n))


def l1_dist(a, b, backend: Backend = Backend.VECTORIZED) -> float:
    a, b = _as_f32(a, "a"), _as_f32(b, "b")
    n = _check_same_length(a, b)
    return float(native_lib(backend).kgeb_l1_dist(a, b, n))


def l2_dist(a, b, backend: Backend = Backend.VECTORIZED) -> float:
    a, b = _as_f32(a, "a"), _as_f32(b, "b")
    n = _check_same_length(a, b)
    return float(native_lib(backend).kgeb_l2_dist(a, b, n))


def axpy(alpha: float, x, y, out=None, backend: Backend = Backend.VECTORIZED) -> np.ndarray:
    x, y = _as_f32(x, "x"), _as_f32(y, "y")
    n = _check_same_length(x, y)
    if out is None:
        out = np.empty(n, dtype=np.float32)
    elif len(out) != n or out.dtype != np.float32 or not out.flags.c_contiguous:
        raise ValueError("out must be a contiguous float32 array matching x")
    native_lib(backend).kgeb_axpy(alpha, x, y, out, n)
    return out


def relu(x, backend: Backend = Backend.VECTORIZED) -> np.ndarray:
    x = _as_f32(x, "x")
    out = np.empty(len(x), dtype=np.float32)
    native_lib(backend).kgeb_relu(x, out, len(x))
    return out


def conv3_rows(h, r, t, filters, backend: Backend = Backend.VECTORIZED) -> np.ndarray:
    """Slide tau filters of shape (3,) over the rows of the d x 3 matrix
    [h; r; t]; returns the filter-major feature map of length tau*d."""
    h, r, t = _as_f32(h, "h"), _as_f32(r, "r"), _as_f32(t, "t")
    d = _check_same_length(h, r, t)
    f = np.ascontiguousarray(filters, dtype=np.float32)
    if f.ndim != 2 or f.shape[1] != 3 or f.shape[0] < 1:
        raise ValueError("filters must have shape (tau, 3) with tau >= 1")
    tau = f.shape[0]
    out = np.empty(tau * d, dtype=np.float32)
    native_lib(backend).kgeb_conv3_rows(h, r, t, d, f.reshape(-1), tau, out)
    return out


def bench_dot(length: int, reps: int, backend: Backend, seed: int = 0) -> float:
    """Time `reps` dot products of the given length inside the native loop.

    Rotates over a small operand pool so the work cannot be hoisted.
    Returns elapsed seconds.
    """
    rng = np.random.default_rng(seed)
    pool = rng.uniform(-1, 1, size=(8, length)).astype(np.float32)
    b = rng.uniform(-1, 1, size=length).astype(np.float32)
    sink = _f64(0.0)
    secs = native_lib(backend).kgeb_bench_dot(
        np.ascontiguousarray(pool.reshape(-1)), 8, b, length, reps, ctypes.byref(sink)
    )
    return float(secs)


def busy_wait(seconds: float, backend: Backend = Backend.VECTORIZED) -> None:
    """Burn CPU on the calling thread for ~`seconds` of wall time.

    The foreign call releases the GIL, so concurrent callers genuinely
    occupy multiple cores.
    """
    native_lib(backend).kgeb_spin(seconds)


def simd_flags() -> set[str]:
    """CPU SIMD capabilities as reported by the OS (x86 feature names)."""
    flags: set[str] = set()
    try:
        with open("/proc/cpuinfo", "r", encoding="utf-8") as fh:
            for line in fh:
                if line.startswith("flags"):
                    flags.update(line.split(":", 1)[1].split())
                    break
    except OSError:
        pass
    return {f for f in flags if f.startswith(("sse", "avx", "fma"))}
