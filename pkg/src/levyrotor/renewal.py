"""Discrete-time renewal noise: waiting-time laws, realizations and exact renewal functionals.

Time is stroboscopic.  Events occur at integer times ``t >= 1`` (never at ``t = 0``);
kick ``n`` of a run is noisy iff an event falls at time ``n + 1``, so after ``t`` kicks
exactly ``N(t, 0)`` noisy kicks have been applied.

Tables are indexed by time: ``f[t]`` for ``t = 0..T`` with ``f[0] = 0``, likewise
``Nbar[t]`` and ``D1[t]``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, zeta

__all__ = [
    "WaitingTimeDistribution",
    "NoiseRealization",
    "RenewalTables",
    "MCRenewalEstimate",
    "pmf_yule_simon",
    "survival_yule_simon",
    "sample_waiting_time",
    "realization_rng",
    "generate_realization",
    "sprinkling_table",
    "mean_events_table",
    "decoherence_single_table",
    "decoherence_pair_row",
    "decoherence_pair_exact",
    "renewal_tables",
    "mc_renewal_oracle",
    "fit_tail_coefficient",
    "coherence_time",
]

# waiting times beyond any simulated horizon are clipped here
TAU_CAP = 2 ** 62
PAIR_EXACT_MAX = 256


def pmf_yule_simon(alpha, tau):
    """Yule-Simon mass ``alpha*Gamma(tau)*Gamma(alpha+1)/Gamma(tau+alpha+1)`` via log-gamma."""
    alpha = float(alpha)
    if not alpha > 0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    tau = np.asarray(tau)
    if np.any(tau < 1) or np.any(tau != np.floor(tau)):
        raise ValueError("tau must be an integer >= 1")
    tau = tau.astype(np.float64)
    out = alpha * np.exp(gammaln(tau) + gammaln(alpha + 1) - gammaln(tau + alpha + 1))
    return out if out.ndim else float(out)


def survival_yule_simon(alpha, t):
    """``P(tau > t) = Gamma(t+1)Gamma(alpha+1)/Gamma(t+alpha+1)`` for integer ``t >= 0``."""
    t = np.asarray(t, dtype=np.float64)
    out = np.exp(gammaln(t + 1) + gammaln(alpha + 1) - gammaln(t + alpha + 1))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class WaitingTimeDistribution:
    """Waiting-time law on the integers ``tau >= 1``.

    Build with one of the constructors: :meth:`deterministic`, :meth:`yule_simon`,
    :meth:`geometric` or :meth:`custom`.
    """
    kind: str
    alpha: float | None = None
    tau0: int | None = None
    p: float | None = None
    table: tuple | None = None
    _tail_amp: float = field(default=0.0, repr=False)

    @classmethod
    def deterministic(cls, tau0: int = 1) -> "WaitingTimeDistribution":
        if int(tau0) != tau0 or tau0 < 1:
            raise ValueError(f"tau0 must be an integer >= 1, got {tau0}")
        return cls("deterministic", tau0=int(tau0))

    @classmethod
    def yule_simon(cls, alpha: float) -> "WaitingTimeDistribution":
        if not alpha > 0:
            raise ValueError(f"alpha must be > 0, got {alpha}")
        return cls("yule_simon", alpha=float(alpha))

    @classmethod
    def geometric(cls, p: float) -> "WaitingTimeDistribution":
        if not 0 < p <= 1:
            raise ValueError(f"p must lie in (0, 1], got {p}")
        return cls("geometric", p=float(p))

    @classmethod
    def custom(cls, pmf, alpha: float | None = None) -> "WaitingTimeDistribution":
        """``pmf[i]`` is the mass at ``tau = i + 1``.

        Missing mass is placed on a power-law tail ``A * tau**(-1-alpha)`` beyond the
        table; without ``alpha`` the table must already sum to 1 within 1e-12.
        """
        pmf = np.asarray(pmf, dtype=np.float64)
        if pmf.ndim != 1 or pmf.size == 0 or np.any(pmf < 0):
            raise ValueError("custom pmf must be a non-empty 1-d array of non-negative masses")
        rest = 1.0 - pmf.sum()
        if rest < -1e-12:
            raise ValueError(f"custom pmf sums to {pmf.sum()!r} > 1")
        amp = 0.0
        if alpha is None:
            if abs(rest) > 1e-12:
                raise ValueError(f"custom pmf without a tail exponent must sum to 1 (missing {rest:.3g})")
        else:
            if not alpha > 0:
                raise ValueError(f"alpha must be > 0, got {alpha}")
            amp = max(rest, 0.0) / zeta(1.0 + alpha, pmf.size + 1)
        return cls("custom", alpha=None if alpha is None else float(alpha), table=tuple(pmf), _tail_amp=amp)

    @property
    def mean(self) -> float:
        if self.kind == "deterministic":
            return float(self.tau0)
        if self.kind == "geometric":
            return 1.0 / self.p
        if self.kind == "yule_simon":
            return self.alpha / (self.alpha - 1) if self.alpha > 1 else np.inf
        table = np.asarray(self.table)
        head = float(np.dot(np.arange(1, table.size + 1), table))
        if self._tail_amp == 0.0:
            return head
        if self.alpha <= 1:
            return np.inf
        return head + self._tail_amp * zeta(self.alpha, table.size + 1)

    def pmf(self, tau) -> np.ndarray:
        tau = np.asarray(tau, dtype=np.int64)
        if self.kind == "deterministic":
            return (tau == self.tau0).astype(np.float64)
        if self.kind == "yule_simon":
            return np.asarray(pmf_yule_simon(self.alpha, np.maximum(tau, 1))) * (tau >= 1)
        if self.kind == "geometric":
            return np.where(tau >= 1, self.p * (1 - self.p) ** (np.maximum(tau, 1) - 1.0), 0.0)
        table = np.asarray(self.table)
        L = table.size
        out = np.zeros(tau.shape)
        inside = (tau >= 1) & (tau <= L)
        out[inside] = table[tau[inside] - 1]
        if self._tail_amp:
            tail = tau > L
            out[tail] = self._tail_amp * tau[tail].astype(np.float64) ** (-1.0 - self.alpha)
        return out

    def survival(self, t) -> np.ndarray:
        """``S(t) = P(tau > t)`` for integers ``t >= 0``."""
        t = np.asarray(t, dtype=np.int64)
        if self.kind == "deterministic":
            return (t < self.tau0).astype(np.float64)
        if self.kind == "yule_simon":
            return np.asarray(survival_yule_simon(self.alpha, t))
        if self.kind == "geometric":
            return (1 - self.p) ** t.astype(np.float64)
        table = np.asarray(self.table)
        L = table.size
        cdf = np.concatenate(([0.0], np.cumsum(table)))
        out = np.empty(t.shape)
        inside = t <= L
        out[inside] = 1.0 - cdf[t[inside]]
        if self._tail_amp:
            out[~inside] = self._tail_amp * zeta(1.0 + self.alpha, t[~inside] + 1.0)
        else:
            out[~inside] = 0.0
        return np.maximum(out, 0.0)

    def pmf_table(self, T: int) -> np.ndarray:
        """``w[t]`` for ``t = 0..T`` with ``w[0] = 0``."""
        return self.pmf(np.arange(T + 1))

    def sample(self, rng: np.random.Generator, size=None) -> np.ndarray:
        return sample_waiting_time(self, rng, size)


def sample_waiting_time(dist: WaitingTimeDistribution, rng: np.random.Generator, size=None):
    """Exact draws from ``dist``.

    Yule-Simon uses its geometric mixture: success probability ``q = U**(1/alpha)``
    (a Beta(alpha, 1) variate) and ``tau = ceil(ln U' / ln(1 - q))``.
    """
    shape = () if size is None else size
    if dist.kind == "deterministic":
        out = np.full(shape, dist.tau0, dtype=np.int64)
    elif dist.kind == "geometric":
        out = rng.geometric(dist.p, size=shape).astype(np.int64)
    elif dist.kind == "yule_simon":
        u = rng.random(shape)
        u2 = 1.0 - rng.random(shape)
        q = u ** (1.0 / dist.alpha)
        with np.errstate(divide="ignore", invalid="ignore"):
            x = np.ceil(np.log(u2) / np.log1p(-q))
        x = np.where(np.isnan(x), TAU_CAP, x)
        out = np.clip(x, 1, TAU_CAP).astype(np.int64)
    else:
        out = _sample_custom(dist, rng, shape)
    return int(out) if size is None else out


def _sample_custom(dist, rng, shape):
    table = np.asarray(dist.table)
    L = table.size
    cdf = np.cumsum(table)
    u = rng.random(shape)
    out = np.searchsorted(cdf, u, side="right").astype(np.int64) + 1
    tail = out > L
    if np.any(tail):
        if not dist._tail_amp:
            out[tail] = L
        else:
            # invert the zeta tail by doubling then bisection on P(tau > t)
            s = 1.0 + dist.alpha
            flat = out.reshape(-1)
            uu = u.reshape(-1)
            for i in np.flatnonzero(tail.reshape(-1)):
                target = 1.0 - uu[i]
                lo, hi = L, 2 * L
                while dist._tail_amp * zeta(s, hi + 1) > target and hi < TAU_CAP // 2:
                    lo, hi = hi, 2 * hi
                while hi - lo > 1:
                    mid = (lo + hi) // 2
                    if dist._tail_amp * zeta(s, mid + 1) > target:
                        lo = mid
                    else:
                        hi = mid
                flat[i] = hi
    return out


def realization_rng(base_seed: int, index: int) -> np.random.Generator:
    """Independent stream for realization ``index``, derived from the base seed by spawn key."""
    return np.random.default_rng(np.random.SeedSequence(int(base_seed), spawn_key=(int(index),)))


@dataclass
class NoiseRealization:
    T: int
    K: float
    kappa: float
    event_flags: np.ndarray
    kick_strengths: np.ndarray

    @property
    def W(self) -> float:
        return float(np.sqrt(3.0 * self.kappa))

    @property
    def event_times(self) -> np.ndarray:
        return np.flatnonzero(self.event_flags) + 1

    @property
    def perturbations(self) -> np.ndarray:
        return self.kick_strengths[self.event_flags] - self.K


def _event_times(dist, T, rng):
    expected = T / dist.mean if np.isfinite(dist.mean) else 0.0
    chunk = int(min(expected, T)) + 64
    times = []
    last = 0
    while last <= T:
        gaps = np.asarray(dist.sample(rng, chunk), dtype=np.int64)
        cum = last + np.cumsum(np.minimum(gaps, T + 1))
        times.append(cum)
        last = int(cum[-1])
    times = np.concatenate(times)
    return times[times <= T]


def generate_realization(dist: WaitingTimeDistribution, T: int, K: float, kappa: float,
                         rng: np.random.Generator) -> NoiseRealization:
    """Kick strengths for ``T`` kicks; noisy kicks get ``K + k`` with ``k ~ U(-W, W)``, ``W = sqrt(3 kappa)``."""
    if T < 1:
        raise ValueError("T must be >= 1")
    if kappa < 0:
        raise ValueError("kappa must be >= 0")
    times = _event_times(dist, T, rng)
    flags = np.zeros(T, dtype=bool)
    flags[times - 1] = True
    W = np.sqrt(3.0 * kappa)
    k = rng.uniform(-W, W, size=times.size)
    strengths = np.full(T, float(K))
    if kappa > 0:
        strengths[times - 1] = K + k
    return NoiseRealization(T, float(K), float(kappa), flags, strengths)


def sprinkling_table(dist: WaitingTimeDistribution, T: int) -> np.ndarray:
    """Event probability per time from ``f(t) = w(t) + sum_{s<t} w(s) f(t-s)``."""
    if T < 1:
        raise ValueError("T must be >= 1")
    w = dist.pmf_table(T)
    wrev = np.ascontiguousarray(w[::-1])
    f = np.zeros(T + 1)
    for t in range(1, T + 1):
        f[t] = w[t] + np.dot(f[1:t], wrev[T - t + 1:T])
    return f


def mean_events_table(f: np.ndarray) -> np.ndarray:
    """``Nbar[t] = sum_{s=1..t} f[s]``."""
    f = np.asarray(f, dtype=np.float64)
    out = np.cumsum(f)
    out[0] = 0.0
    return out


def coherence_time(hbar: float, kappa: float) -> float:
    """Weak-noise coherence time ``2 hbar**2 / kappa``."""
    return 2.0 * hbar ** 2 / kappa


def _q(t_c: float) -> float:
    if not t_c > 0:
        raise ValueError(f"t_c must be > 0, got {t_c}")
    return float(np.exp(-1.0 / t_c))


def decoherence_single_table(dist: WaitingTimeDistribution, t_c: float, T: int) -> np.ndarray:
    """``D(t, 0) = E[q**N(t,0)]``, ``q = exp(-1/t_c)``, via ``D(t) = S(t) + q sum_{s<=t} w(s) D(t-s)``."""
    q = _q(t_c)
    w = dist.pmf_table(T)
    S = dist.survival(np.arange(T + 1))
    wrev = np.ascontiguousarray(w[::-1])
    D = np.empty(T + 1)
    D[0] = 1.0
    for t in range(1, T + 1):
        D[t] = S[t] + q * np.dot(D[0:t], wrev[T - t:T])
    return D


@dataclass
class RenewalTables:
    dist: WaitingTimeDistribution
    t_c: float
    f: np.ndarray
    Nbar: np.ndarray
    D1: np.ndarray

    @property
    def T(self) -> int:
        return self.f.size - 1

    @property
    def q(self) -> float:
        return _q(self.t_c)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["t", "f", "Nbar", "D1"])
            for t in range(self.T + 1):
                wr.writerow([t, f"{self.f[t]:.17g}", f"{self.Nbar[t]:.17g}", f"{self.D1[t]:.17g}"])


def renewal_tables(dist: WaitingTimeDistribution, t_c: float, T: int) -> RenewalTables:
    f = sprinkling_table(dist, T)
    return RenewalTables(dist, float(t_c), f, mean_events_table(f), decoherence_single_table(dist, t_c, T))


def decoherence_pair_row(tables: RenewalTables, t_prime: int, coefficient: str = "discrete") -> np.ndarray:
    """``D(t', t'')`` for ``t'' = 0..t'``.

    ``D(t',t'') = D(t',0) + c * sum_{s=1..t''} f(s) D(t'-s, 0)`` with ``c = 1 - q``
    (``coefficient="discrete"``, exact for the stroboscopic process) or ``c = 1/t_c``
    (``"continuous"``).  In the discrete case ``D(t', t')`` is checked against 1 and pinned.
    """
    if not 0 <= t_prime <= tables.T:
        raise ValueError(f"t_prime={t_prime} outside table horizon {tables.T}")
    if coefficient == "discrete":
        c = 1.0 - tables.q
    elif coefficient == "continuous":
        c = 1.0 / tables.t_c
    else:
        raise ValueError(f"unknown coefficient {coefficient!r}")
    row = np.empty(t_prime + 1)
    row[0] = tables.D1[t_prime]
    if t_prime:
        terms = tables.f[1:t_prime + 1] * tables.D1[t_prime - 1::-1]
        row[1:] = tables.D1[t_prime] + c * np.cumsum(terms)
        if coefficient == "discrete":
            if abs(row[-1] - 1.0) > 1e-8:
                raise FloatingPointError(f"D({t_prime},{t_prime}) = {row[-1]!r} drifted from 1")
            row[-1] = 1.0
    return row


def decoherence_pair_exact(dist: WaitingTimeDistribution, t_c: float, a: int, b: int) -> float:
    """``E[q**N(b, a)]`` for a process started fresh at 0, by first-event decomposition.

    ``G(a,b) = S(b) + sum_{u<=a} w(u) G(a-u, b-u) + q sum_{a<u<=b} w(u) D(b-u, 0)``.
    Cost is ``O(a*b)``; windows are limited to ``b <= 256``.
    """
    if not 0 <= a <= b:
        raise ValueError("need 0 <= a <= b")
    if b > PAIR_EXACT_MAX:
        raise ValueError(f"window end {b} exceeds {PAIR_EXACT_MAX}")
    if a == b:
        return 1.0
    q = _q(t_c)
    D1 = decoherence_single_table(dist, t_c, b)
    if a == 0:
        return float(D1[b])
    w = dist.pmf_table(b)
    S = dist.survival(np.arange(b + 1))
    d = b - a
    G = np.empty(a + 1)
    G[0] = D1[d]
    for ai in range(1, a + 1):
        bi = ai + d
        inner = np.dot(w[1:ai + 1], G[ai - 1::-1])
        outer = np.dot(w[ai + 1:bi + 1], D1[bi - ai - 1::-1])
        G[ai] = S[bi] + inner + q * outer
    return float(G[a])


@dataclass
class MCRenewalEstimate:
    n: int
    f: np.ndarray
    f_se: np.ndarray
    Nbar: np.ndarray
    Nbar_se: np.ndarray
    D1: np.ndarray
    D1_se: np.ndarray
    pairs: dict


def mc_renewal_oracle(dist: WaitingTimeDistribution, t_c: float, T: int, n_realizations: int,
                      rng: np.random.Generator, pairs=(), chunk: int = 1000) -> MCRenewalEstimate:
    """Monte Carlo estimates (with standard errors) of ``f``, ``Nbar``, ``D(t,0)`` and ``D(b,a)``.

    ``pairs`` holds ``(a, b)`` windows; the estimate for each is the mean of ``q**N(b, a)``.
    """
    if n_realizations < 1000:
        raise ValueError("mc_renewal_oracle needs at least 1000 realizations")
    q = _q(t_c)
    pairs = [tuple(map(int, ab)) for ab in pairs]
    acc = {k: np.zeros(T + 1) for k in ("f", "f2", "N", "N2", "D", "D2")}
    pacc = {ab: [0.0, 0.0] for ab in pairs}
    done = 0
    while done < n_realizations:
        n = min(chunk, n_realizations - done)
        flags = np.zeros((n, T + 1), dtype=bool)
        pos = np.zeros(n, dtype=np.int64)
        active = np.arange(n)
        while active.size:
            gaps = np.minimum(np.asarray(dist.sample(rng, active.size)), T + 1)
            pos[active] += gaps
            hit = pos[active] <= T
            active = active[hit]
            flags[active, pos[active]] = True
        counts = np.cumsum(flags, axis=1, dtype=np.int32)
        ff = flags.astype(np.float64)
        acc["f"] += ff.sum(0)
        acc["f2"] += ff.sum(0)
        cn = counts.astype(np.float64)
        acc["N"] += cn.sum(0)
        acc["N2"] += (cn * cn).sum(0)
        dq = q ** cn
        acc["D"] += dq.sum(0)
        acc["D2"] += (dq * dq).sum(0)
        for (a, b) in pairs:
            v = q ** (cn[:, b] - cn[:, a])
            pacc[(a, b)][0] += v.sum()
            pacc[(a, b)][1] += (v * v).sum()
        done += n

    N = n_realizations

    def stats(s, s2):
        mean = s / N
        var = np.maximum(s2 / N - mean * mean, 0.0) * N / (N - 1)
        return mean, np.sqrt(var / N)

    f, f_se = stats(acc["f"], acc["f2"])
    Nb, Nb_se = stats(acc["N"], acc["N2"])
    D, D_se = stats(acc["D"], acc["D2"])
    pr = {ab: tuple(float(x) for x in stats(np.asarray(v[0]), np.asarray(v[1]))) for ab, v in pacc.items()}
    return MCRenewalEstimate(N, f, f_se, Nb, Nb_se, D, D_se, pr)


def fit_tail_coefficient(Nbar: np.ndarray, alpha: float, t_range=None) -> float:
    """Least-squares ``c`` in ``Nbar(t) ~ t**alpha sin(pi alpha)/(pi c)``, default window the last decade."""
    T = Nbar.size - 1
    lo, hi = t_range if t_range is not None else (max(1, T // 10), T)
    t = np.arange(lo, hi + 1, dtype=np.float64)
    g = t ** alpha * np.sin(np.pi * alpha) / np.pi
    inv_c = np.dot(g, Nbar[lo:hi + 1]) / np.dot(g, g)
    return float(1.0 / inv_c)
