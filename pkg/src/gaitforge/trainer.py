"""Black-box policy search: CMA-ES (primary) and augmented random search.

Both optimizers are implemented from the standard published formulas and
exercised on analytic benchmarks in the test suite; the gait task plugs in
through rollout evaluation. Candidate fitness is a single-episode return
with one shared seed per iteration (common random numbers), rotated across
iterations so the optimizer cannot overfit one initial perturbation.
"""

from __future__ import annotations

import multiprocessing as mp
from dataclasses import dataclass, field

import numpy as np

from gaitforge.mpc import MpcConfig
from gaitforge.policy import DEFAULT_ARCH, PolicyArch, zero_params
from gaitforge.robot import RobotParams
from gaitforge.sim import EnvConfig, LocomotionEnv
from gaitforge.swing import PdGains


# ---------------------------------------------------------------------------
# CMA-ES (minimizer)
# ---------------------------------------------------------------------------

class CmaEs:
    """(mu/mu_w, lambda) evolution strategy with cumulative step-size
    adaptation and rank-1 + rank-mu covariance updates.

    Minimizes. Learning constants are the standard dimension-dependent
    defaults. For large dimension the eigendecomposition of C is refreshed
    lazily every ~lambda/((c1+cmu)*N*10) evaluations; `diagonal=True`
    restricts C to its diagonal (separable variant) for constrained
    machines.
    """

    def __init__(self, x0: np.ndarray, sigma0: float,
                 popsize: int | None = None, seed: int = 0,
                 diagonal: bool = False):
        x0 = np.asarray(x0, dtype=np.float64)
        n = x0.shape[0]
        if sigma0 <= 0:
            raise ValueError("sigma0 must be positive")
        self.n = n
        self.lam = popsize or 4 + int(3 * np.log(n))
        if self.lam < 2:
            raise ValueError("population must be >= 2")
        self.mu = self.lam // 2
        w = np.log(self.lam / 2.0 + 0.5) - np.log(np.arange(1, self.mu + 1))
        self.weights = w / w.sum()
        self.mueff = 1.0 / np.sum(self.weights ** 2)
        self.cc = (4.0 + self.mueff / n) / (n + 4.0 + 2.0 * self.mueff / n)
        self.cs = (self.mueff + 2.0) / (n + self.mueff + 5.0)
        self.c1 = 2.0 / ((n + 1.3) ** 2 + self.mueff)
        cmu = 2.0 * (self.mueff - 2.0 + 1.0 / self.mueff) / (
            (n + 2.0) ** 2 + self.mueff)
        self.cmu = min(1.0 - self.c1, cmu)
        self.damps = (1.0 + 2.0 * max(0.0, np.sqrt(
            (self.mueff - 1.0) / (n + 1.0)) - 1.0) + self.cs)
        self.chi_n = np.sqrt(n) * (1.0 - 1.0 / (4.0 * n)
                                   + 1.0 / (21.0 * n * n))
        self.diagonal = diagonal

        self.mean = x0.copy()
        self.sigma = float(sigma0)
        self.pc = np.zeros(n)
        self.ps = np.zeros(n)
        if diagonal:
            self.c_diag = np.ones(n)
        else:
            self.C = np.eye(n)
            self.B = np.eye(n)
            self.D = np.ones(n)
            self._eigen_evals = 0
        self.count_evals = 0
        self.rng = np.random.default_rng(seed)
        self._pending = None

    # -- sampling ----------------------------------------------------------

    def ask(self) -> np.ndarray:
        """(lam, n) candidate matrix."""
        z = self.rng.standard_normal((self.lam, self.n))
        if self.diagonal:
            y = z * np.sqrt(self.c_diag)
        else:
            self._update_eigen_if_stale()
            y = (z * self.D) @ self.B.T
        x = self.mean + self.sigma * y
        self._pending = x
        return x

    def _update_eigen_if_stale(self, force: bool = False):
        gap = self.lam / ((self.c1 + self.cmu) * self.n * 10.0)
        if force or self.count_evals - self._eigen_evals > gap:
            self._eigen_evals = self.count_evals
            self.C = 0.5 * (self.C + self.C.T)
            vals, vecs = np.linalg.eigh(self.C)
            floor = max(vals.max(), 1e-300) * 1e-20
            self.D = np.sqrt(np.maximum(vals, floor))
            self.B = vecs

    def _inv_sqrt_apply(self, v: np.ndarray) -> np.ndarray:
        if self.diagonal:
            return v / np.sqrt(self.c_diag)
        return self.B @ ((self.B.T @ v) / self.D)

    # -- update ------------------------------------------------------------

    def tell(self, xs: np.ndarray, fitness: np.ndarray) -> None:
        xs = np.asarray(xs, dtype=np.float64)
        f = np.asarray(fitness, dtype=np.float64)
        if xs.shape != (self.lam, self.n) or f.shape != (self.lam,):
            raise ValueError("tell() shapes must match ask()")
        self.count_evals += self.lam
        order = np.argsort(f, kind="stable")
        sel = xs[order[:self.mu]]
        old_mean = self.mean
        self.mean = self.weights @ sel
        y_w = (self.mean - old_mean) / self.sigma

        self.ps = ((1.0 - self.cs) * self.ps
                   + np.sqrt(self.cs * (2.0 - self.cs) * self.mueff)
                   * self._inv_sqrt_apply(y_w))
        expo = 2.0 * self.count_evals / self.lam
        ps_norm = np.linalg.norm(self.ps)
        hsig = (ps_norm / np.sqrt(1.0 - (1.0 - self.cs) ** expo)
                < (1.4 + 2.0 / (self.n + 1.0)) * self.chi_n)
        self.pc = ((1.0 - self.cc) * self.pc
                   + (np.sqrt(self.cc * (2.0 - self.cc) * self.mueff) * y_w
                      if hsig else 0.0))

        art = (sel - old_mean) / self.sigma  # (mu, n)
        hsig_corr = (1.0 - float(hsig)) * self.cc * (2.0 - self.cc)
        if self.diagonal:
            # separable update keeps only variances
            rank1 = self.pc ** 2
            rankmu = (self.weights[:, None] * art * art).sum(axis=0)
            self.c_diag = ((1.0 - self.c1 - self.cmu) * self.c_diag
                           + self.c1 * (rank1 + hsig_corr * self.c_diag)
                           + self.cmu * rankmu)
            self.c_diag = np.maximum(self.c_diag, 1e-300)
        else:
            rank1 = np.outer(self.pc, self.pc)
            rankmu = (self.weights[:, None] * art).T @ art
            self.C = ((1.0 - self.c1 - self.cmu) * self.C
                      + self.c1 * (rank1 + hsig_corr * self.C)
                      + self.cmu * rankmu)

        self.sigma *= np.exp((self.cs / self.damps)
                             * (ps_norm / self.chi_n - 1.0))
        if not np.isfinite(self.sigma) or self.sigma <= 0:
            raise FloatingPointError("step size left the finite range")

    def min_eigenvalue(self) -> float:
        """Smallest eigenvalue of the current covariance (diagnostic)."""
        if self.diagonal:
            return float(self.c_diag.min())
        c = 0.5 * (self.C + self.C.T)
        return float(np.linalg.eigvalsh(c).min())


def cma_minimize(fn, x0, sigma0, popsize=None, max_evals=10000,
                 target=-np.inf, seed=0, diagonal=False):
    """Loop helper for analytic benchmarks; returns (x_best, f_best, evals)."""
    es = CmaEs(np.asarray(x0, dtype=np.float64), sigma0, popsize, seed,
               diagonal)
    f_best = np.inf
    x_best = np.asarray(x0, dtype=np.float64).copy()
    while es.count_evals < max_evals:
        xs = es.ask()
        fs = np.array([fn(x) for x in xs])
        es.tell(xs, fs)
        i = int(np.argmin(fs))
        if fs[i] < f_best:
            f_best = float(fs[i])
            x_best = xs[i].copy()
        if f_best <= target:
            break
    return x_best, f_best, es.count_evals


# ---------------------------------------------------------------------------
# Augmented random search, basic (V1) variant
# ---------------------------------------------------------------------------

class Ars:
    """Antithetic random search. Maximizes.

    Candidates come in pairs x +/- sigma*delta; the update is
    theta += step/(2 N sigma) * sum (r+ - r-) delta. No observation or
    reward normalization (V1).
    """

    def __init__(self, x0: np.ndarray, n_pairs: int = 16,
                 sigma: float = 0.03, step_size: float = 0.02,
                 seed: int = 0):
        if n_pairs < 1 or sigma <= 0 or step_size <= 0:
            raise ValueError("invalid ARS configuration")
        self.x = np.asarray(x0, dtype=np.float64).copy()
        self.n = self.x.shape[0]
        self.n_pairs = n_pairs
        self.sigma = sigma
        self.step_size = step_size
        self.rng = np.random.default_rng(seed)
        self.count_evals = 0
        self._deltas = None

    def ask(self) -> np.ndarray:
        """(2*n_pairs, n); row 2i is +delta_i, row 2i+1 is -delta_i."""
        self._deltas = self.rng.standard_normal((self.n_pairs, self.n))
        xs = np.empty((2 * self.n_pairs, self.n))
        xs[0::2] = self.x + self.sigma * self._deltas
        xs[1::2] = self.x - self.sigma * self._deltas
        return xs

    def tell(self, rewards: np.ndarray) -> None:
        r = np.asarray(rewards, dtype=np.float64)
        if r.shape != (2 * self.n_pairs,):
            raise ValueError("rewards must match the asked candidates")
        self.count_evals += r.shape[0]
        diff = r[0::2] - r[1::2]
        grad = diff @ self._deltas
        self.x = self.x + self.step_size / (2.0 * self.n_pairs * self.sigma) * grad


def ars_minimize(fn, x0, n_pairs=8, sigma=0.03, step_size=0.02,
                 max_evals=20000, target=-np.inf, seed=0):
    """Benchmark helper; minimizes fn by maximizing its negation."""
    ars = Ars(np.asarray(x0, dtype=np.float64), n_pairs, sigma, step_size,
              seed)
    f_best = np.inf
    x_best = np.asarray(x0, dtype=np.float64).copy()
    while ars.count_evals < max_evals:
        xs = ars.ask()
        fs = np.array([fn(x) for x in xs])
        ars.tell(-fs)
        i = int(np.argmin(fs))
        if fs[i] < f_best:
            f_best = float(fs[i])
            x_best = xs[i].copy()
        f_center = fn(ars.x)
        if f_center < f_best:
            f_best = float(f_center)
            x_best = ars.x.copy()
        if f_best <= target:
            break
    return x_best, f_best, ars.count_evals


# ---------------------------------------------------------------------------
# rollout evaluation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RolloutSetup:
    """Everything a worker needs to build its own environment."""

    robot: RobotParams = field(default_factory=RobotParams)
    mpc: MpcConfig = field(default_factory=MpcConfig)
    env: EnvConfig = field(default_factory=EnvConfig)
    gains: PdGains = field(default_factory=PdGains)
    z_clearance: float = 0.03
    arch: PolicyArch = DEFAULT_ARCH


_worker_env: LocomotionEnv | None = None
_worker_setup: RolloutSetup | None = None


def _init_worker(setup: RolloutSetup) -> None:
    global _worker_env, _worker_setup
    _worker_setup = setup
    _worker_env = LocomotionEnv(setup.robot, setup.mpc, setup.env,
                                setup.gains, setup.z_clearance,
                                arch=setup.arch)


def _eval_candidate(args):
    params, seed = args
    metrics = _worker_env.run_policy_episode(params, seed)
    return (metrics["return"], metrics["cot"], metrics["mean_speed_error"],
            metrics["steps"])


def rollout_return(policy_params: np.ndarray, env_seed: int,
                   setup: RolloutSetup | None = None,
                   env: LocomotionEnv | None = None):
    """(return, cost of transport, mean relative speed error) of one episode."""
    if env is None:
        setup = setup or RolloutSetup()
        env = LocomotionEnv(setup.robot, setup.mpc, setup.env, setup.gains,
                            setup.z_clearance, arch=setup.arch)
    metrics = env.run_policy_episode(np.asarray(policy_params, np.float64),
                                     env_seed)
    return metrics["return"], metrics["cot"], metrics["mean_speed_error"]


# ---------------------------------------------------------------------------
# training loops
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EsConfig:
    algorithm: str = "cmaes"           # "cmaes" | "ars"
    population: int = 32               # candidates per iteration (CMA-ES)
    n_pairs: int = 16                  # perturbation pairs (ARS)
    init_std: float = 0.03
    ars_step: float = 0.02
    iterations: int = 100
    workers: int = 1
    seed: int = 0
    diagonal_covariance: bool = False
    env_step_budget: int | None = None

    def __post_init__(self):
        if self.algorithm not in ("cmaes", "ars"):
            raise ValueError("algorithm must be 'cmaes' or 'ars'")
        if self.population < 2 or self.n_pairs < 1:
            raise ValueError("population must be >= 2")
        if self.init_std <= 0:
            raise ValueError("init_std must be positive")
        if self.workers < 1 or self.iterations < 1:
            raise ValueError("workers and iterations must be >= 1")


@dataclass
class TrainRecord:
    iteration: int
    evaluations: int
    env_steps: int
    best_return: float
    mean_return: float
    best_return_ever: float
    best_cot: float
    best_speed_error: float
    sigma: float
    checkpoint: str = ""


TRAIN_CSV_COLUMNS = ("iteration", "evaluations", "env_steps", "best_return",
                     "mean_return", "best_return_ever", "best_cot",
                     "best_speed_error", "sigma", "checkpoint")


class _Evaluator:
    """Maps candidate parameter vectors to episode metrics, optionally
    across a process pool. Results are gathered in candidate order."""

    def __init__(self, setup: RolloutSetup, workers: int):
        self.setup = setup
        self.workers = workers
        self._pool = None
        if workers > 1:
            ctx = mp.get_context("fork")
            self._pool = ctx.Pool(workers, initializer=_init_worker,
                                  initargs=(setup,))
        else:
            _init_worker(setup)

    def evaluate(self, candidates: np.ndarray, seed: int):
        jobs = [(np.ascontiguousarray(c), seed) for c in candidates]
        if self._pool is None:
            return [_eval_candidate(j) for j in jobs]
        return self._pool.map(_eval_candidate, jobs)

    def close(self):
        if self._pool is not None:
            self._pool.close()
            self._pool.join()
            self._pool = None


def _train_loop(config: EsConfig, setup: RolloutSetup, ask, tell,
                sigma_of, x0, on_iteration=None):
    rng = np.random.default_rng(config.seed)
    evaluator = _Evaluator(setup, config.workers)
    records: list[TrainRecord] = []
    best_ever = -np.inf
    best_params = np.asarray(x0, dtype=np.float64).copy()
    env_steps = 0
    evals = 0
    try:
        for it in range(1, config.iterations + 1):
            iter_seed = int(rng.integers(0, 2 ** 31 - 1))
            xs = ask()
            results = evaluator.evaluate(xs, iter_seed)
            returns = np.array([r[0] for r in results])
            tell(xs, returns)
            evals += len(results)
            env_steps += int(sum(r[3] for r in results))
            i_best = int(np.argmax(returns))
            if returns[i_best] > best_ever:
                best_ever = float(returns[i_best])
                best_params = xs[i_best].copy()
            rec = TrainRecord(
                iteration=it,
                evaluations=evals,
                env_steps=env_steps,
                best_return=float(returns[i_best]),
                mean_return=float(returns.mean()),
                best_return_ever=best_ever,
                best_cot=float(results[i_best][1]),
                best_speed_error=float(results[i_best][2]),
                sigma=float(sigma_of()),
            )
            records.append(rec)
            if on_iteration is not None:
                on_iteration(rec, best_params)
            if (config.env_step_budget is not None
                    and env_steps >= config.env_step_budget):
                break
    finally:
        evaluator.close()
    return best_params, records


def cma_es_train(config: EsConfig, setup: RolloutSetup | None = None,
                 initial_params: np.ndarray | None = None,
                 on_iteration=None):
    """Evolve the gait policy with CMA-ES; returns (best params, records).

    Fitness is the episode return (maximized; the optimizer internally
    minimizes its negation). Population evaluations share one seed per
    iteration.
    """
    setup = setup or RolloutSetup()
    x0 = (np.asarray(initial_params, dtype=np.float64)
          if initial_params is not None else zero_params(setup.arch))
    es = CmaEs(x0, config.init_std, popsize=config.population,
               seed=config.seed, diagonal=config.diagonal_covariance)

    def tell(xs, returns):
        es.tell(xs, -returns)

    return _train_loop(config, setup, es.ask, tell,
                       lambda: es.sigma, x0, on_iteration)


def ars_train(config: EsConfig, setup: RolloutSetup | None = None,
              initial_params: np.ndarray | None = None, on_iteration=None):
    """Evolve the gait policy with antithetic random search."""
    setup = setup or RolloutSetup()
    x0 = (np.asarray(initial_params, dtype=np.float64)
          if initial_params is not None else zero_params(setup.arch))
    ars = Ars(x0, n_pairs=config.n_pairs, sigma=config.init_std,
              step_size=config.ars_step, seed=config.seed)

    def tell(xs, returns):
        ars.tell(returns)

    return _train_loop(config, setup, ars.ask, tell,
                       lambda: ars.sigma, x0, on_iteration)


def train(config: EsConfig, setup: RolloutSetup | None = None,
          initial_params: np.ndarray | None = None, on_iteration=None):
    fn = cma_es_train if config.algorithm == "cmaes" else ars_train
    return fn(config, setup, initial_params, on_iteration)
