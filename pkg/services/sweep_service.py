"""Service for orchestrating the figure sweeps."""
import math
import os
from datetime import datetime, timezone
from multiprocessing import Pool
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from config import config
from exceptions import ConvergenceError, DomainError
from logger import setup_logger
from models import AsymptoticConfig, SaddleSolution, SweepRow, SweepTable
from services.pareto_service import ParetoService
from services.saddle_service import SaddleService
from services.simulation_service import SimulationService
from utils.metrics import PerformanceMonitor, ReplicateStats
from utils.validator import Validator

logger = setup_logger(__name__)

POLE_HALF_WIDTH = 0.02


def _eps_curve_task(task: tuple) -> Tuple[List[SweepRow], List[float]]:
    cfg, eps_grid, empirical, p, seeds, seed, replicate_workers = task
    return SweepService.eps_curve_rows(cfg, eps_grid, empirical, p, seeds, seed, replicate_workers)


def _delta_curve_task(task: tuple) -> Tuple[List[SweepRow], List[float]]:
    cfg, inv_delta_grid, empirical, p, seeds, seed, replicate_workers = task
    return SweepService.inv_delta_curve_rows(cfg, inv_delta_grid, empirical, p, seeds, seed, replicate_workers)


class SweepService:
    """Builds the figure tables from the theory and simulation services."""

    def __init__(self, workers: Optional[int] = None, stamp: bool = False):
        """
        Initialize sweep service.

        Args:
            workers: Process pool size; defaults to config.MAX_WORKERS
            stamp: Record wall-clock time in provenance when SOURCE_DATE_EPOCH is unset
        """
        self.workers = config.MAX_WORKERS if workers is None else max(1, workers)
        self.stamp = stamp
        self.pareto = ParetoService()

    def provenance(self, command: str, seed: Optional[int], p: Optional[int] = None) -> Dict[str, Any]:
        """Master seed, tool version and an optional reproducible timestamp."""
        epoch = os.getenv("SOURCE_DATE_EPOCH")
        if epoch is not None:
            timestamp = datetime.fromtimestamp(int(epoch), tz=timezone.utc).isoformat()
        elif self.stamp:
            timestamp = datetime.now(tz=timezone.utc).isoformat()
        else:
            timestamp = None
        return {
            "command": command,
            "master_seed": seed,
            "p": p,
            "timestamp": timestamp,
            "tool_version": config.TOOL_VERSION,
        }

    def _table(self, cfg, axis_name, rows, command, seed, p, skipped=(), label="") -> SweepTable:
        return SweepTable(
            schema_version=config.SCHEMA_VERSION,
            config=cfg,
            axis_name=axis_name,
            rows=rows,
            provenance=self.provenance(command, seed, p),
            skipped=sorted(skipped),
            label=label,
        )

    def _map(self, func, tasks: List[tuple]) -> list:
        if self.workers > 1 and len(tasks) > 1:
            with Pool(processes=min(self.workers, len(tasks))) as pool:
                return pool.map(func, tasks)
        return [func(task) for task in tasks]

    # ------------------------------------------------------------------
    # Curves
    # ------------------------------------------------------------------

    @staticmethod
    def _empirical_columns(
        cfg: AsymptoticConfig, eps: float, p: int, seeds: int, seed: int, workers: int
    ) -> Dict[str, Any]:
        n = max(1, int(round(cfg.delta * p)))
        summary = SimulationService().run_replicates(n, p, cfg, eps, seeds, seed, workers)
        sr, sr_err = ReplicateStats.mean_and_stderr(summary.sr)
        ar, ar_err = ReplicateStats.mean_and_stderr(summary.ar)
        return {
            "sr_empirical": sr,
            "ar_empirical": ar,
            "n_seeds": summary.n_seeds,
            "stderr_sr": sr_err,
            "stderr_ar": ar_err,
        }

    @staticmethod
    def _theory_point(
        saddle: SaddleService, cfg: AsymptoticConfig, warm: Optional[SaddleSolution]
    ) -> Tuple[SaddleSolution, float, float]:
        try:
            sol = saddle.solve_saddle(cfg, warm_start=warm)
        except ConvergenceError as e:
            raise e.annotate(delta=cfg.delta, eps=cfg.eps_train)
        except DomainError as e:
            raise DomainError(f"{e} [delta={cfg.delta!r}, eps={cfg.eps_train!r}]") from e
        sr, ar = saddle.asymptotic_risks(sol, cfg)
        return sol, sr, ar

    @staticmethod
    def eps_curve_rows(
        cfg: AsymptoticConfig,
        eps_grid: Sequence[float],
        empirical: bool,
        p: int,
        seeds: int,
        seed: int,
        replicate_workers: int = 1,
    ) -> Tuple[List[SweepRow], List[float]]:
        """
        Theory (and optionally Monte Carlo) risks along an eps grid at fixed delta.

        Grid points are solved in ascending order, each warm-started from the
        previous saddle point. Every point reuses the master seed, so the
        empirical column has common random numbers along the curve.
        """
        saddle = SaddleService()
        rows, warm = [], None
        for eps in sorted(eps_grid):
            point_cfg = cfg.with_(eps_train=eps)
            Validator.validate_saddle_config(point_cfg)
            sol, sr, ar = SweepService._theory_point(saddle, point_cfg, warm)
            warm = None if sol.closed_form else sol
            extra = (
                SweepService._empirical_columns(point_cfg, eps, p, seeds, seed, replicate_workers)
                if empirical else {}
            )
            rows.append(SweepRow(eps, sr, ar, **extra))
        return rows, []

    @staticmethod
    def is_pole(delta: float, eps: float) -> bool:
        """Points the eps = 0 curve cannot report: delta <= 1 and the neighbourhood of 1."""
        if eps > 0:
            return False
        return delta <= 1 or abs(delta - 1.0) < POLE_HALF_WIDTH * (1.0 - 1e-9)

    @staticmethod
    def inv_delta_curve_rows(
        cfg: AsymptoticConfig,
        inv_delta_grid: Sequence[float],
        empirical: bool,
        p: int,
        seeds: int,
        seed: int,
        replicate_workers: int = 1,
    ) -> Tuple[List[SweepRow], List[float]]:
        """Risks along a 1/delta grid at fixed eps, skipping the eps = 0 pole."""
        saddle = SaddleService()
        rows, skipped, warm = [], [], None
        for inv_delta in sorted(inv_delta_grid):
            point_cfg = cfg.with_(delta=1.0 / inv_delta)
            if SweepService.is_pole(point_cfg.delta, point_cfg.eps_train):
                logger.warning(f"Skipping 1/delta={inv_delta} at eps=0 (pole or underdetermined)")
                skipped.append(inv_delta)
                continue
            sol, sr, ar = SweepService._theory_point(saddle, point_cfg, warm)
            warm = None if sol.closed_form else sol
            extra = (
                SweepService._empirical_columns(
                    point_cfg, point_cfg.eps_train, p, seeds, seed, replicate_workers
                )
                if empirical else {}
            )
            rows.append(SweepRow(inv_delta, sr, ar, **extra))
        return rows, skipped

    # ------------------------------------------------------------------
    # Commands
    # ------------------------------------------------------------------

    @PerformanceMonitor.time_function
    def cmd_pareto(self, cfg: AsymptoticConfig, lambda_grid: Sequence[float]) -> SweepTable:
        """
        Pareto-optimal (SR, AR) over a lambda grid.

        Args:
            cfg: Problem parameters (eps_train unused)
            lambda_grid: Nonempty weights

        Returns:
            SweepTable with axis "lambda"
        """
        lambdas = sorted(set(Validator.validate_grid("lambda", lambda_grid)))
        points = self.pareto.pareto_curve(lambdas, cfg)
        flags = ParetoService.is_non_dominated(points)
        if not all(flags):
            logger.warning(f"{flags.count(False)} Pareto points are dominated; check the solver tolerances")
        rows = [SweepRow(pt.knob, pt.sr, pt.ar) for pt in points]
        return self._table(cfg.with_(eps_train=0.0), "lambda", rows, "pareto", None, None, label="pareto")

    def _eps_tables(self, command, cfg, eps_grid, delta_list, empirical, seeds, p, seed) -> List[SweepTable]:
        eps_grid = Validator.validate_grid("eps", eps_grid)
        deltas = sorted(set(Validator.validate_grid("delta", delta_list, strictly_positive=True)))
        p = config.DEFAULT_P if p is None else p
        seeds = config.DEFAULT_SEEDS if seeds is None else seeds
        seed = config.DEFAULT_SEED if seed is None else seed
        for delta in deltas:
            for eps in eps_grid:
                Validator.validate_saddle_config(cfg.with_(delta=delta, eps_train=eps))

        replicate_workers = self.workers if len(deltas) == 1 else 1
        tasks = [
            (cfg.with_(delta=delta), eps_grid, empirical, p, seeds, seed, replicate_workers)
            for delta in deltas
        ]
        logger.info(f"{command}: {len(deltas)} curve(s) x {len(eps_grid)} eps values, empirical={empirical}")
        results = self._map(_eps_curve_task, tasks)
        return [
            self._table(
                cfg.with_(delta=delta, eps_train=0.0),
                "eps",
                rows,
                command,
                seed if empirical else None,
                p if empirical else None,
                skipped,
                label=f"delta={delta:g}",
            )
            for delta, (rows, skipped) in zip(deltas, results)
        ]

    @PerformanceMonitor.time_function
    def cmd_algo_curve(
        self,
        cfg: AsymptoticConfig,
        eps_grid: Sequence[float],
        delta_list: Sequence[float],
        empirical: bool = False,
        seeds: int = None,
        p: int = None,
        seed: int = None,
    ) -> List[SweepTable]:
        """
        (SR, AR) of adversarial training along an eps grid, one table per delta.

        Raises:
            DomainError: If some grid point has eps = 0 and delta <= 1
            ConvergenceError: Annotated with (delta, eps)
        """
        return self._eps_tables("algo-curve", cfg, eps_grid, delta_list, empirical, seeds, p, seed)

    @PerformanceMonitor.time_function
    def cmd_sr_sweep(
        self,
        cfg: AsymptoticConfig,
        eps_grid: Sequence[float],
        delta_list: Sequence[float],
        empirical: bool = False,
        seeds: int = None,
        p: int = None,
        seed: int = None,
    ) -> List[SweepTable]:
        """Standard risk against eps, one table per delta."""
        return self._eps_tables("sr-sweep", cfg, eps_grid, delta_list, empirical, seeds, p, seed)

    @PerformanceMonitor.time_function
    def cmd_double_descent(
        self,
        cfg: AsymptoticConfig,
        inv_delta_grid: Sequence[float],
        eps_list: Sequence[float],
        empirical: bool = False,
        seeds: int = None,
        p: int = None,
        seed: int = None,
    ) -> List[SweepTable]:
        """Standard risk against 1/delta, one table per eps."""
        grid = Validator.validate_grid("inv_delta", inv_delta_grid, strictly_positive=True)
        eps_values = sorted(set(Validator.validate_grid("eps", eps_list)))
        p = config.DEFAULT_P if p is None else p
        seeds = config.DEFAULT_SEEDS if seeds is None else seeds
        seed = config.DEFAULT_SEED if seed is None else seed

        replicate_workers = self.workers if len(eps_values) == 1 else 1
        tasks = [
            (cfg.with_(eps_train=eps), grid, empirical, p, seeds, seed, replicate_workers)
            for eps in eps_values
        ]
        logger.info(f"double-descent: {len(eps_values)} curve(s) x {len(grid)} points, empirical={empirical}")
        results = self._map(_delta_curve_task, tasks)
        return [
            self._table(
                cfg.with_(eps_train=eps),
                "inv_delta",
                rows,
                "double-descent",
                seed if empirical else None,
                p if empirical else None,
                skipped,
                label=f"eps={eps:g}",
            )
            for eps, (rows, skipped) in zip(eps_values, results)
        ]

    @PerformanceMonitor.time_function
    def cmd_montecarlo(
        self, cfg: AsymptoticConfig, p: int = None, seeds: int = None, seed: int = None
    ) -> SweepTable:
        """
        Per-replicate empirical risks at one (delta, eps) next to the saddle prediction.

        Returns:
            SweepTable with axis "replicate"
        """
        p = config.DEFAULT_P if p is None else p
        seeds = config.DEFAULT_SEEDS if seeds is None else seeds
        seed = config.DEFAULT_SEED if seed is None else seed
        _, sr_theory, ar_theory = self._theory_point(SaddleService(), cfg, None)

        n = max(1, int(round(cfg.delta * p)))
        summary = SimulationService().run_replicates(n, p, cfg, cfg.eps_train, seeds, seed, self.workers)
        rows = [
            SweepRow(float(k), sr_theory, ar_theory, float(summary.sr[k]), float(summary.ar[k]), 1, 0.0, 0.0)
            for k in range(summary.n_seeds)
        ]
        sr_mean, sr_err = ReplicateStats.mean_and_stderr(summary.sr)
        logger.info(
            f"montecarlo: mean SR {sr_mean:.6g} +/- {sr_err:.2g} against theory {sr_theory:.6g} "
            f"({ReplicateStats.relative_gap(sr_mean, sr_theory):.2%})"
        )
        label = f"delta={cfg.delta:g},eps={cfg.eps_train:g}"
        return self._table(cfg, "replicate", rows, "montecarlo", seed, p, label=label)

    # ------------------------------------------------------------------
    # Comparisons
    # ------------------------------------------------------------------

    @staticmethod
    def curve_distance(curve: SweepTable, frontier: SweepTable) -> float:
        """
        Largest distance from a curve's (SR, AR) points to the frontier polyline.

        Args:
            curve: Algorithmic tradeoff table
            frontier: Pareto table

        Returns:
            Directed sup-distance in the (SR, AR) plane
        """
        vertices = sorted(zip(frontier.column("sr_theory"), frontier.column("ar_theory")))
        vertices = np.array(vertices)
        worst = 0.0
        for point in zip(curve.column("sr_theory"), curve.column("ar_theory")):
            worst = max(worst, SweepService._distance_to_polyline(np.array(point), vertices))
        return worst

    @staticmethod
    def _distance_to_polyline(point: np.ndarray, vertices: np.ndarray) -> float:
        if len(vertices) == 1:
            return float(np.linalg.norm(point - vertices[0]))
        best = math.inf
        for start, end in zip(vertices[:-1], vertices[1:]):
            edge = end - start
            length = float(edge @ edge)
            t = 0.0 if length == 0 else min(max(float((point - start) @ edge) / length, 0.0), 1.0)
            best = min(best, float(np.linalg.norm(point - (start + t * edge))))
        return best
