"""Exact-increment simulation of drifted BM and its conditioned versions.

Conditioning on min > v is done by rejection on the grid, with every step
thinned by the Brownian bridge crossing probability exp(-2 (a - v)(b - v)/dt)
so that the accepted grid values have exactly the continuous-time law.

Randomness comes from counter-based Philox streams keyed by
(seed, stream_id, chunk). Each chunk produces a fixed number of accepted paths
from its own stream, so results do not depend on the number of workers.
"""

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from .errors import DomainError, RejectionBudgetError
from .excursion_laws import ExcursionSpec
from .meander_laws import MeanderSpec

THREADS_ENV = "MEANDER_THREADS"


@dataclass(frozen=True)
class SimConfig:
    n_steps: int = 1024
    horizon: float = 1.0
    seed: int = 0
    stream_id: int = 0
    max_rejections: int = 10_000_000
    chunk_size: int = 4096

    def __post_init__(self):
        if self.n_steps < 2:
            raise DomainError("n_steps must be at least 2")
        if not self.horizon > 0:
            raise DomainError("horizon must be positive")
        if self.max_rejections < 1 or self.chunk_size < 1:
            raise DomainError("max_rejections and chunk_size must be at least 1")
        if not 0 <= self.seed < 2 ** 64 or self.stream_id < 0:
            raise DomainError("seed must be a 64-bit unsigned integer and stream_id non-negative")

    @property
    def dt(self):
        return self.horizon / self.n_steps

    def times(self):
        return np.linspace(0.0, self.horizon, self.n_steps + 1)


@dataclass
class PathSample:
    times: np.ndarray
    values: np.ndarray
    attempts: int = 1
    crossing_checked: bool = False
    metadata: dict = field(default_factory=dict)

    def to_record(self, uniform=True):
        rec = {"values": [float(x) for x in self.values], "attempts": int(self.attempts)}
        if not uniform:
            rec["times"] = [float(x) for x in self.times]
        return rec


@dataclass
class PathBatch:
    """Many paths recorded on a common set of grid times."""

    times: np.ndarray
    values: np.ndarray
    attempts: np.ndarray
    crossing_checked: bool
    metadata: dict

    def __len__(self):
        return self.values.shape[0]

    @property
    def acceptance_rate(self):
        return self.metadata["accepted"] / self.metadata["proposals"]

    def path(self, i):
        return PathSample(self.times, self.values[i], int(self.attempts[i]), self.crossing_checked, dict(self.metadata))


def stream_rng(seed, stream_id, chunk):
    """Independent generator for one (seed, stream, chunk) key."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream_id), int(chunk)))
    return np.random.Generator(np.random.Philox(ss))


def worker_count(workers=None):
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get(THREADS_ENV)
    return max(1, int(env)) if env else 1


def _map_chunks(fn, n_chunks, workers):
    if workers <= 1 or n_chunks <= 1:
        return [fn(c) for c in range(n_chunks)]
    with ProcessPoolExecutor(min(workers, n_chunks)) as pool:
        return list(pool.map(fn, range(n_chunks)))


def _columns(record, n_steps):
    if record is None:
        return np.arange(n_steps + 1)
    cols = np.unique(np.asarray(record, dtype=int))
    if cols.size == 0 or cols[0] < 0 or cols[-1] > n_steps:
        raise DomainError("recorded columns must be grid indices in [0, n_steps]")
    return cols


def column_for_time(cfg: SimConfig, s):
    """Grid index of time s; s must sit on the grid."""
    k = s / cfg.dt
    j = int(round(k))
    if abs(k - j) > 1e-9:
        raise DomainError(f"time {s} is not on the simulation grid")
    return j


# ---------------------------------------------------------------------------
# proposal kernels: each returns (accepted indices, recorded values)


def _survives(rng, a, b, v, dt):
    with np.errstate(over="ignore"):
        return (b > v) & (rng.random(a.size) >= np.exp(-2.0 * (a - v) * (b - v) / dt))


def _gather(u, cols, snaps, idx):
    """Assemble recorded columns of the accepted proposals from alive-set snapshots."""
    rec = np.empty((idx.size, cols.size))
    if idx.size == 0:
        return rec
    for j, c in enumerate(cols):
        if c == 0:
            rec[:, j] = u
        else:
            ids, vals = snaps[j]
            rec[:, j] = vals[np.searchsorted(ids, idx)]
    return rec


def _propose_meander(rng, m, p, cols):
    u, v, mu, dt, n = p["start"], p["barrier"], p["drift"], p["dt"], p["n_steps"]
    sdt = math.sqrt(dt)
    where = {int(c): j for j, c in enumerate(cols)}
    snaps = {}
    x = np.full(m, float(u))
    idx = np.arange(m)
    for k in range(1, n + 1):
        b = x + mu * dt + sdt * rng.standard_normal(x.size)
        keep = _survives(rng, x, b, v, dt)
        x = b[keep]
        idx = idx[keep]
        if k in where:
            snaps[where[k]] = (idx, x)
        if x.size == 0:
            break
    return idx, _gather(u, cols, snaps, idx)


def _propose_excursion(rng, m, p, cols):
    u, c, v, t, n = p["start"], p["endpoint"], p["barrier"], p["horizon"], p["n_steps"]
    grid = np.linspace(0.0, t, n + 1)
    where = {int(cc): j for j, cc in enumerate(cols)}
    snaps = {}
    x = np.full(m, float(u))
    idx = np.arange(m)
    for k in range(1, n + 1):
        dt = grid[k] - grid[k - 1]
        if k == n:
            b = np.full(x.size, float(c))
        else:
            rem = t - grid[k - 1]
            after = t - grid[k]
            mean = x + (c - x) * dt / rem
            b = mean + math.sqrt(dt * after / rem) * rng.standard_normal(x.size)
        keep = _survives(rng, x, b, v, dt)
        x = b[keep]
        idx = idx[keep]
        if k in where:
            snaps[where[k]] = (idx, x)
        if x.size == 0:
            break
    return idx, _gather(u, cols, snaps, idx)


def _band_bridge_stay(a, b, v, x, dt):
    """P(bridge from a to b over dt stays inside (v, x)); a, b inside the band."""
    L = x - v
    K = 2 + int(math.ceil(3.0 * math.sqrt(dt) / L))
    num = np.zeros(a.shape)
    for k in range(-K, K + 1):
        num += (np.exp(-0.5 * ((b - a - 2 * k * L) ** 2 - (b - a) ** 2) / dt)
                - np.exp(-0.5 * ((b + a - 2 * v - 2 * k * L) ** 2 - (b - a) ** 2) / dt))
    return np.clip(num, 0.0, 1.0)


def _refine_crossing(rng, tau, a, b, x, dt, rounds=200):
    """Place an upward crossing of x in [tau, tau + dt] by one bisection of the bridge.

    The midpoint is drawn from the bridge conditioned on a crossing (rejection
    on the unconditioned midpoint), then the half is chosen with its crossing
    share. Returns tau + dt/4 or tau + 3 dt/4 (tau + dt/2 if rejection stalls).
    """
    out = tau + 0.5 * dt
    todo = np.arange(tau.size)
    h = 0.5 * dt
    for _ in range(rounds):
        if todo.size == 0:
            break
        aa, bb = a[todo], b[todo]
        mid = 0.5 * (aa + bb) + math.sqrt(0.25 * dt) * rng.standard_normal(todo.size)
        with np.errstate(over="ignore"):
            p1 = np.where((mid >= x) | (aa >= x), 1.0, np.exp(-2.0 * (x - aa) * (x - mid) / h))
            p2 = np.where((mid >= x) | (bb >= x), 1.0, np.exp(-2.0 * (x - mid) * (x - bb) / h))
        cross = 1.0 - (1.0 - p1) * (1.0 - p2)
        ok = rng.random(todo.size) < cross
        first = rng.random(todo.size) * cross < p1
        done = todo[ok]
        out[done] = tau[done] + np.where(first[ok], 0.25 * dt, 0.75 * dt)
        todo = todo[~ok]
    return out


def _propose_fpt(rng, m, p, cols):
    u, v, mu, dt, n = p["start"], p["barrier"], p["drift"], p["dt"], p["n_steps"]
    x, t, t_prime = p["level"], p["horizon"], p["t_prime"]
    sdt = math.sqrt(dt)
    xs = np.full(m, float(u))
    idx = np.arange(m)
    hit = np.full(m, np.inf)
    hit_a = np.zeros(m)
    hit_b = np.zeros(m)
    if u >= x:
        hit[:] = 0.0
    for k in range(1, n + 1):
        a = xs
        b = a + mu * dt + sdt * rng.standard_normal(a.size)
        keep = _survives(rng, a, b, v, dt)
        a, b, idx = a[keep], b[keep], idx[keep]
        fresh = np.isinf(hit[idx])
        if fresh.any():
            fa, fb = a[fresh], b[fresh]
            over = fb >= x
            with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
                stay_v = -np.expm1(-2.0 * (fa - v) * (fb - v) / dt)
                stay_band = _band_bridge_stay(fa, np.minimum(fb, x - 1e-300), v, x, dt)
                p_hit = np.where(over, 1.0, 1.0 - stay_band / stay_v)
            fire = rng.random(fa.size) < p_hit
            ids = idx[fresh][fire]
            hit[ids] = (k - 1) * dt
            hit_a[ids] = fa[fire]
            hit_b[ids] = fb[fire]
        xs = b
        if xs.size == 0:
            break
    acc = idx
    # free continuation on (t, t']
    n2 = int(math.ceil((t_prime - t) / dt - 1e-9))
    todo = acc[np.isinf(hit[acc])]
    pos = xs[np.isinf(hit[acc])]
    for k in range(n2):
        if todo.size == 0:
            break
        t0 = t + k * dt
        h = min(dt, t_prime - t0)
        b = pos + mu * h + math.sqrt(h) * rng.standard_normal(pos.size)
        with np.errstate(over="ignore"):
            p_hit = np.where(b >= x, 1.0, np.exp(-2.0 * (x - pos) * (x - b) / h))
        fire = rng.random(pos.size) < p_hit
        ids = todo[fire]
        hit[ids] = t0
        hit_a[ids] = pos[fire]
        hit_b[ids] = b[fire]
        todo, pos = todo[~fire], b[~fire]
    refine = acc[np.isfinite(hit[acc]) & (hit[acc] > 0)]
    if refine.size:
        hit[refine] = _refine_crossing(rng, hit[refine], hit_a[refine], hit_b[refine], x, dt)
    hit = np.where(hit > t_prime, np.inf, hit)
    return acc, hit[acc][:, None]


_PROPOSERS = {"meander": _propose_meander, "excursion": _propose_excursion, "fpt": _propose_fpt}


def _conditioned_chunk(chunk, kind, params, cfg, cols):
    rng = stream_rng(cfg.seed, cfg.stream_id, chunk)
    need = cfg.chunk_size
    parts, att_parts = [], []
    proposed = accepted = 0
    last = -1
    while need > 0:
        if accepted == 0:
            m = 2 * need if proposed == 0 else 4 * max(proposed, need)
        else:
            m = int(math.ceil(1.3 * need * proposed / accepted)) + 64
        m = min(max(m, 256), 1 << 20, cfg.max_rejections - proposed)
        if m <= 0:
            rate = accepted / max(proposed, 1)
            raise RejectionBudgetError(
                f"rejection budget of {cfg.max_rejections} proposals exhausted "
                f"(empirical acceptance rate {rate:.3g})", rate)
        idx, rec = _PROPOSERS[kind](rng, m, params, cols)
        accepted += idx.size
        take = idx[:need]
        glob = proposed + take
        if take.size:
            att_parts.append(np.diff(np.concatenate(([last], glob))))
            last = glob[-1]
            parts.append(rec[:need])
        need -= take.size
        proposed += m
    return np.concatenate(parts), np.concatenate(att_parts), proposed, accepted


def _run_conditioned(kind, params, cfg, n_paths, cols, workers):
    if n_paths < 1:
        raise DomainError("n_paths must be at least 1")
    n_chunks = int(math.ceil(n_paths / cfg.chunk_size))
    fn = partial(_conditioned_chunk, kind=kind, params=params, cfg=cfg, cols=cols)
    results = _map_chunks(fn, n_chunks, worker_count(workers))
    values = np.concatenate([r[0] for r in results])[:n_paths]
    attempts = np.concatenate([r[1] for r in results])[:n_paths]
    proposals = sum(r[2] for r in results)
    accepted = sum(r[3] for r in results)
    meta = {"kind": kind, "proposals": int(proposals), "accepted": int(accepted),
            "n_chunks": n_chunks, "chunk_size": cfg.chunk_size, "seed": cfg.seed,
            "stream_id": cfg.stream_id, "n_steps": cfg.n_steps}
    meta.update({k: v for k, v in params.items() if k not in meta})
    return values, attempts, meta


# ---------------------------------------------------------------------------
# public samplers


def _free_chunk(chunk, mu, start, cfg):
    rng = stream_rng(cfg.seed, cfg.stream_id, chunk)
    z = rng.standard_normal((cfg.chunk_size, cfg.n_steps))
    steps = mu * cfg.dt + math.sqrt(cfg.dt) * z
    out = np.empty((cfg.chunk_size, cfg.n_steps + 1))
    out[:, 0] = start
    out[:, 1:] = start + np.cumsum(steps, axis=1)
    return out


def sample_free_paths(mu, start, cfg: SimConfig, n_paths, workers=None):
    n_chunks = int(math.ceil(n_paths / cfg.chunk_size))
    fn = partial(_free_chunk, mu=mu, start=start, cfg=cfg)
    values = np.concatenate(_map_chunks(fn, n_chunks, worker_count(workers)))[:n_paths]
    meta = {"kind": "free", "drift": mu, "start": start, "seed": cfg.seed, "stream_id": cfg.stream_id,
            "proposals": n_paths, "accepted": n_paths}
    return PathBatch(cfg.times(), values, np.ones(n_paths, dtype=int), False, meta)


def sample_free_path(mu, start, cfg: SimConfig):
    """One path of B(0) = start plus drift mu, exact Gaussian increments."""
    return sample_free_paths(mu, start, cfg, 1).path(0)


def _meander_params(spec: MeanderSpec, cfg: SimConfig, start):
    if abs(spec.horizon - cfg.horizon) > 1e-12 * spec.horizon:
        raise DomainError("spec horizon and simulation horizon differ")
    return {"start": float(start), "barrier": spec.barrier, "drift": spec.drift,
            "dt": cfg.dt, "n_steps": cfg.n_steps, "horizon": cfg.horizon}


def sample_meander_paths(spec: MeanderSpec, cfg: SimConfig, n_paths, record=None, workers=None):
    """Paths of drifted BM from u conditioned on min over [0, t] > v (rejection with crossing thinning)."""
    if spec.at_barrier:
        raise DomainError("use sample_meander_paths_at_barrier for a barrier start")
    cols = _columns(record, cfg.n_steps)
    params = _meander_params(spec, cfg, spec.start)
    values, attempts, meta = _run_conditioned("meander", params, cfg, n_paths, cols, workers)
    return PathBatch(cfg.times()[cols], values, attempts, True, meta)


def sample_meander_path(spec: MeanderSpec, cfg: SimConfig):
    return sample_meander_paths(spec, cfg, 1).path(0)


def default_epsilon(cfg: SimConfig):
    return math.sqrt(cfg.dt) / 10.0


def sample_meander_paths_at_barrier(spec: MeanderSpec, cfg: SimConfig, n_paths, epsilon=None, record=None,
                                    workers=None):
    """Barrier-start meander approximated from u = v + epsilon; epsilon is kept in the metadata."""
    if not spec.at_barrier:
        raise DomainError("spec must start at the barrier")
    eps = default_epsilon(cfg) if epsilon is None else float(epsilon)
    if not eps > 0:
        raise DomainError("epsilon must be positive")
    cols = _columns(record, cfg.n_steps)
    params = _meander_params(spec, cfg, spec.barrier + eps)
    values, attempts, meta = _run_conditioned("meander", params, cfg, n_paths, cols, workers)
    meta["epsilon"] = eps
    return PathBatch(cfg.times()[cols], values, attempts, True, meta)


def sample_meander_path_at_barrier(spec: MeanderSpec, cfg: SimConfig, epsilon=None):
    return sample_meander_paths_at_barrier(spec, cfg, 1, epsilon).path(0)


def sample_excursion_paths(spec: ExcursionSpec, cfg: SimConfig, n_paths, record=None, workers=None):
    """Driftless Brownian bridge from u to c, conditioned on min > v by rejection with crossing thinning."""
    if abs(spec.horizon - cfg.horizon) > 1e-12 * spec.horizon:
        raise DomainError("spec horizon and simulation horizon differ")
    cols = _columns(record, cfg.n_steps)
    params = {"start": spec.start, "endpoint": spec.endpoint, "barrier": spec.barrier,
              "horizon": cfg.horizon, "n_steps": cfg.n_steps, "drift": spec.drift}
    values, attempts, meta = _run_conditioned("excursion", params, cfg, n_paths, cols, workers)
    return PathBatch(cfg.times()[cols], values, attempts, True, meta)


def sample_excursion_path(spec: ExcursionSpec, cfg: SimConfig):
    return sample_excursion_paths(spec, cfg, 1).path(0)


def sample_two_phase_fpt(spec: MeanderSpec, x, t_prime, cfg: SimConfig, n_paths=1, epsilon=None, workers=None):
    """First passage times over x: conditioned on min > v up to t, free on (t, t'].

    Returns an array of times with inf for no passage by t'. A barrier start
    is simulated from v + epsilon as in the meander sampler.
    """
    if not t_prime > spec.horizon:
        raise DomainError("t' must exceed the horizon")
    if not x > spec.barrier:
        raise DomainError("level must lie above the barrier")
    if spec.at_barrier:
        eps = default_epsilon(cfg) if epsilon is None else float(epsilon)
        start = spec.barrier + eps
    else:
        eps = None
        start = spec.start
    params = _meander_params(spec, cfg, start)
    params.update({"level": float(x), "t_prime": float(t_prime)})
    values, attempts, meta = _run_conditioned("fpt", params, cfg, n_paths, np.zeros(1, dtype=int), workers)
    if eps is not None:
        meta["epsilon"] = eps
    out = values[:, 0]
    return out, meta


# ---------------------------------------------------------------------------
# last zero and the post-zero path


def _post_zero_chunk(chunk, mu, t, s_values, cfg):
    rng = stream_rng(cfg.seed, cfg.stream_id, chunk)
    n, N = cfg.chunk_size, cfg.n_steps
    dt = t / N
    X = np.zeros((n, N + 1))
    X[:, 1:] = np.cumsum(mu * dt + math.sqrt(dt) * rng.standard_normal((n, N)), axis=1)
    a, b = X[:, :-1], X[:, 1:]
    with np.errstate(over="ignore"):
        zero = (a * b <= 0) | (rng.random((n, N)) < np.exp(-2.0 * a * b / dt))
    last = N - 1 - np.argmax(zero[:, ::-1], axis=1)
    rows = np.arange(n)
    alpha = np.abs(X[rows, last])
    beta = np.abs(X[rows, last + 1])
    # time from the last zero to the end of its interval: tau = dt r / (1 + r),
    # r inverse Gaussian (Levy when the interval starts at zero)
    safe = np.where(alpha > 0, alpha, 1.0)
    r_ig = rng.wald(beta / safe, beta * beta / dt)
    z = rng.standard_normal(n)
    r_levy = beta * beta / (dt * z * z)
    r = np.where(alpha > 0, r_ig, r_levy)
    tau = dt * r / (1.0 + r)
    end = (last + 1) * dt
    t0 = end - tau
    out = np.empty((n, len(s_values)))
    for j, s in enumerate(s_values):
        target = t0 + s * (t - t0)
        val = np.empty(n)
        inside = target <= end
        # 3-d Bessel bridge from 0 at t0 to beta at end
        f = (target[inside] - t0[inside]) / tau[inside]
        g = rng.standard_normal((inside.sum(), 3)) * np.sqrt(tau[inside] * f * (1 - f))[:, None]
        g[:, 0] += f * beta[inside]
        val[inside] = np.sqrt(np.sum(g * g, axis=1))
        # later intervals: bridge conditioned not to touch 0
        todo = np.flatnonzero(~inside)
        k = np.minimum((target[todo] / dt).astype(int), N - 1)
        k = np.maximum(k, last[todo] + 1)
        lo, hi = X[todo, k], X[todo, k + 1]
        h = np.clip(target[todo] - k * dt, 0.0, dt)
        while todo.size:
            mean = lo + (hi - lo) * h / dt
            m = mean + np.sqrt(h * (dt - h) / dt) * rng.standard_normal(todo.size)
            with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
                q1 = np.where(h > 0, np.exp(-2.0 * lo * m / h), 0.0)
                q2 = np.where(h < dt, np.exp(-2.0 * m * hi / (dt - h)), 0.0)
            ok = (m * lo > 0) & (rng.random(todo.size) >= q1) & (rng.random(todo.size) >= q2)
            val[todo[ok]] = np.abs(m[ok])
            todo, lo, hi, h = todo[~ok], lo[~ok], hi[~ok], h[~ok]
        out[:, j] = val / np.sqrt(t - t0)
    return t0, out


def sample_post_zero(mu, t, s_values, cfg: SimConfig, n_paths, workers=None):
    """Last zero T0 before t of B^mu from 0 and |B^mu(T0 + s (t - T0))| / sqrt(t - T0) for each s.

    The grid only locates the interval holding the last zero: the zero-crossing
    test per interval is exact, T0 inside it is drawn from its exact law
    (inverse Gaussian after a time change), and the value at the target time
    comes from the Bessel bridge or a zero-avoiding Brownian bridge.
    """
    s_values = [float(s) for s in np.atleast_1d(s_values)]
    if any(not 0 < s < 1 for s in s_values):
        raise DomainError("fractions s must lie in (0, 1)")
    n_chunks = int(math.ceil(n_paths / cfg.chunk_size))
    fn = partial(_post_zero_chunk, mu=mu, t=t, s_values=s_values, cfg=cfg)
    results = _map_chunks(fn, n_chunks, worker_count(workers))
    t0 = np.concatenate([r[0] for r in results])[:n_paths]
    vals = np.concatenate([r[1] for r in results])[:n_paths]
    return t0, vals


# ---------------------------------------------------------------------------
# output


def write_jsonl(batch: PathBatch, path):
    """One JSON object per path; times are written only when the grid is not the full uniform one."""
    n_steps = batch.metadata.get("n_steps")
    uniform = n_steps is not None and batch.times.size == n_steps + 1
    with open(path, "w") as fh:
        for i in range(len(batch)):
            rec = batch.path(i).to_record(uniform)
            fh.write(json.dumps(rec) + "\n")
