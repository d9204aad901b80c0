"""
Invariant suites run by `verify`: each check draws its own seeded instances
at desk scale and reports pass/fail with a short detail line
"""
import json
import logging
from pathlib import Path
from typing import Callable, List, Optional, Tuple

import numpy as np

from app.errors import InputValidationError, SublinearError, VerificationError
from app.models import CheckResult, Problem, SamplerBackend, Strategy
from app.services.common import derive_seed, make_rng
from app.services.estimate import est_cc, est_maxcut
from app.services.graph import Graph, SignedGraph
from app.services.graph_io import read_edge_list
from app.services.lp import build_cc_lp, build_dual_maxcut, build_maxcut_lp, solve_or_raise
from app.services.sampling import CoresetGraph, edge_sample, pair_distribution_exact
from app.services.sketch import CountMinSketch, make_sampler_bank
from app.services.solvers import (
    cc_exact,
    cc_trivial_bound,
    cc_value,
    cc_value_definition,
    k_restriction_check,
    maxcut_exact,
)

logger = logging.getLogger(__name__)

FIXTURES_DIR = Path(__file__).resolve().parents[2] / "fixtures"
VALUE_TOLERANCE = 1e-6


def random_graph(rng: np.random.Generator, n: int, density: float = 0.5, weighted: bool = False) -> Graph:
    iu, iv = np.triu_indices(n, 1)
    keep = rng.random(len(iu)) < density
    w = rng.uniform(0.1, 1.0, int(keep.sum())) if weighted else np.ones(int(keep.sum()))
    return Graph.from_edges(n, u=iu[keep], v=iv[keep], w=w)


def random_signed_graph(rng: np.random.Generator, n: int, density: float = 0.6) -> SignedGraph:
    iu, iv = np.triu_indices(n, 1)
    keep = rng.random(len(iu)) < density
    count = int(keep.sum())
    magnitude = rng.uniform(0.1, 1.0, count)
    positive = rng.random(count) < 0.5
    return SignedGraph.from_edges(
        n, u=iu[keep], v=iv[keep],
        c_plus=np.where(positive, magnitude, 0.0), c_minus=np.where(positive, 0.0, magnitude),
    )


def all_cut_values(g: Graph) -> np.ndarray:
    """Cut value of every assignment with vertex 0 on side 0"""
    masks = np.arange(1 << max(g.n - 1, 0), dtype=np.int64) << 1
    sides = (masks[:, None] >> np.arange(g.n)) & 1
    crossing = sides[:, g.u] != sides[:, g.v]
    return crossing.astype(float) @ g.w


class VerificationService:
    def __init__(self, fixtures_dir: Optional[Path] = None):
        self.fixtures_dir = Path(fixtures_dir) if fixtures_dir else FIXTURES_DIR

    def fixtures(self, seed: int) -> CheckResult:
        """Exact solvers and full-seed estimates reproduce the shipped fixture values"""
        expected_path = self.fixtures_dir / "expected.json"
        try:
            expected = json.loads(expected_path.read_text(encoding="utf-8"))
        except (OSError, UnicodeDecodeError) as e:
            return CheckResult(name="fixtures", passed=False, detail=f"cannot read {expected_path}: {e}")
        failures = []
        for name, entry in sorted(expected.items()):
            g = read_edge_list(self.fixtures_dir / name)
            gamma = np.ones(g.n)
            if entry["problem"] == Problem.CC.value:
                k = int(entry.get("k", g.n))
                value = cc_exact(g, k)[1]
                estimate = est_cc(g, gamma, k, seed).value
            else:
                value = maxcut_exact(g)[1]
                estimate = est_maxcut(g, gamma, seed).value
            if abs(value - entry["value"]) > VALUE_TOLERANCE or abs(estimate - entry["value"]) > VALUE_TOLERANCE:
                failures.append(f"{name}: exact {value:.6g}, est {estimate:.6g}, expected {entry['value']}")
        return CheckResult(
            name="fixtures",
            passed=not failures,
            detail="; ".join(failures) or f"{len(expected)} fixtures match",
        )

    def double_sampling(self, seed: int, trials: int = 30) -> CheckResult:
        """Strategies A and B induce the same joint law of (S, S')"""
        rng = make_rng(seed)
        worst = 0.0
        for _ in range(trials):
            n = int(rng.integers(1, 9))
            p = rng.random(n)
            q = p * rng.random(n)
            a = pair_distribution_exact(Strategy.A, p, q)
            b = pair_distribution_exact(Strategy.B, p, q)
            worst = max(worst, a.max_difference(b), abs(a.prob.sum() - 1))
        return CheckResult(name="double_sampling", passed=worst <= 1e-12, detail=f"max difference {worst:.3g}")

    def lp_soundness(self, seed: int, trials: int = 40) -> CheckResult:
        """LP optimum never exceeds the exact optimum, for arbitrary rho"""
        rng = make_rng(seed)
        worst = -np.inf
        for t in range(trials):
            g = random_graph(rng, int(rng.integers(2, 9)), weighted=bool(t % 2))
            rho = rng.uniform(0, g.degrees.max() + 1, g.n)
            lp = solve_or_raise(build_maxcut_lp(g, rho).model).objective
            worst = max(worst, lp - maxcut_exact(g)[1])
        for _ in range(trials // 2):
            sg = random_signed_graph(rng, int(rng.integers(2, 6)))
            k = int(rng.integers(1, 4))
            rho = rng.uniform(-1, 1, (sg.n, k)) * (sg.degrees.max() + 1)
            lp = solve_or_raise(build_cc_lp(sg, k, rho).model).objective
            worst = max(worst, lp - cc_exact(sg, k)[1])
        return CheckResult(
            name="lp_soundness", passed=worst <= VALUE_TOLERANCE, detail=f"max LP excess {worst:.3g}"
        )

    def strong_duality(self, seed: int, trials: int = 15) -> CheckResult:
        rng = make_rng(seed)
        worst = 0.0
        for _ in range(trials):
            g = random_graph(rng, int(rng.integers(1, 9)))
            rho = rng.uniform(0, g.degrees.max() + 1, g.n)
            primal = solve_or_raise(build_maxcut_lp(g, rho).model).objective
            dual = solve_or_raise(build_dual_maxcut(g, rho)).objective
            worst = max(worst, abs(primal - dual))
        return CheckResult(name="strong_duality", passed=worst <= VALUE_TOLERANCE, detail=f"max gap {worst:.3g}")

    def full_seed_exactness(self, seed: int, trials: int = 6) -> CheckResult:
        """With every vertex in the seed the estimate equals the optimum"""
        rng = make_rng(seed)
        worst = 0.0
        for t in range(trials):
            g = random_graph(rng, int(rng.integers(2, 8)))
            worst = max(worst, abs(est_maxcut(g, np.ones(g.n), t).value - maxcut_exact(g)[1]))
            sg = random_signed_graph(rng, int(rng.integers(2, 6)))
            worst = max(worst, abs(est_cc(sg, np.ones(sg.n), 2, t).value - cc_exact(sg, 2)[1]))
        return CheckResult(
            name="full_seed_exactness", passed=worst <= VALUE_TOLERANCE, detail=f"max deviation {worst:.3g}"
        )

    def edge_sample_cuts(self, seed: int, trials: int = 40, epsilon: float = 0.25) -> CheckResult:
        """Every cut of an edge-sampled core-set stays within eps W of the input cut"""
        rng = make_rng(seed)
        g = random_graph(rng, 12, density=0.7)
        p = rng.uniform(0.2, 1.0, g.n)
        delta = g.avg_degree
        coreset = CoresetGraph(
            graph=Graph.from_edges(g.n, u=g.u, v=g.v, w=g.w / (p[g.u] * p[g.v] * delta ** 2)),
            original_ids=np.arange(g.n),
            probabilities=p,
            delta=delta,
            n_original=g.n,
        )
        reference = all_cut_values(coreset.graph)
        W = coreset.total_weight
        good = 0
        for t in range(trials):
            sampled = edge_sample(coreset, epsilon, derive_seed(seed, t))
            if np.max(np.abs(all_cut_values(sampled.graph) - reference)) <= epsilon * W:
                good += 1
        return CheckResult(
            name="edge_sample_cuts", passed=good >= 0.95 * trials, detail=f"{good}/{trials} trials within eps W"
        )

    def sketch_contracts(self, seed: int, trials: int = 100) -> CheckResult:
        """CountMin error bound and the l1-sampler law of both backends on a skewed vector"""
        rng = make_rng(seed)
        n, k = 1000, 100
        within = 0
        for t in range(trials):
            cm = CountMinSketch.for_accuracy(n, k, 0.01, derive_seed(seed, t))
            items = rng.integers(0, n, 5000)
            cm.update_many(items, np.ones(len(items)))
            exact = np.bincount(items, minlength=n)
            over = cm.query(0) - exact[0]
            within += int(0 <= over <= len(items) / k)

        dim, draws = 100, 20_000
        x = np.arange(1, dim + 1, dtype=float)
        distances = {}
        for backend in SamplerBackend:
            bank = make_sampler_bank(backend, dim, draws, seed)
            if backend == SamplerBackend.SKETCH:
                extra = rng.uniform(0, 5, dim)
                bank.update_many(np.arange(dim), x + extra)
                order = rng.permutation(dim)
                bank.update_many(order, -extra[order])
            else:
                for part in np.array_split(rng.permutation(dim), 10):
                    bank.update_many(part, x[part])
            picked, _, ok = bank.sample_all()
            freq = np.bincount(picked[ok], minlength=dim) / max(int(ok.sum()), 1)
            distances[backend.value] = 0.5 * float(np.abs(freq - x / x.sum()).sum())
        passed = within >= 0.99 * trials and max(distances.values()) <= 0.05
        tvs = ", ".join(f"{name} TV {tv:.4f}" for name, tv in distances.items())
        return CheckResult(
            name="sketch_contracts",
            passed=passed,
            detail=f"CountMin {within}/{trials} within bound, {tvs}",
        )

    def cluster_count(self, seed: int, trials: int = 30, epsilon: float = 1 / 3) -> CheckResult:
        """ceil(1/eps) clusters keep a (1 - eps) share of the optimum; optimum beats max(C+, C-)"""
        rng = make_rng(seed)
        failures = 0
        for _ in range(trials):
            sg = random_signed_graph(rng, int(rng.integers(2, 7)))
            opt, _, ratio = k_restriction_check(sg, epsilon)
            if ratio < 1 - epsilon - 1e-9 or opt < cc_trivial_bound(sg) - 1e-9:
                failures += 1
        return CheckResult(name="cluster_count", passed=failures == 0, detail=f"{failures} failing instances")

    def objective_forms(self, seed: int, trials: int = 30) -> CheckResult:
        """Simplified and definitional MAX-AGREE objectives agree"""
        rng = make_rng(seed)
        worst = 0.0
        for _ in range(trials):
            sg = random_signed_graph(rng, int(rng.integers(2, 10)))
            labels = rng.integers(0, 3, sg.n)
            worst = max(worst, abs(cc_value(sg, labels) - cc_value_definition(sg, labels)))
        return CheckResult(name="objective_forms", passed=worst <= 1e-9, detail=f"max difference {worst:.3g}")

    def suites(self) -> List[Tuple[str, Callable[[int], CheckResult]]]:
        return [
            ("fixtures", self.fixtures),
            ("double_sampling", self.double_sampling),
            ("lp_soundness", self.lp_soundness),
            ("strong_duality", self.strong_duality),
            ("full_seed_exactness", self.full_seed_exactness),
            ("edge_sample_cuts", self.edge_sample_cuts),
            ("sketch_contracts", self.sketch_contracts),
            ("cluster_count", self.cluster_count),
            ("objective_forms", self.objective_forms),
        ]

    def run(self, seed: int = 0, only: Optional[List[str]] = None) -> List[CheckResult]:
        suites = self.suites()
        unknown = sorted(set(only or []) - {name for name, _ in suites})
        if unknown:
            raise InputValidationError(f"unknown verification suites: {', '.join(unknown)}")
        results = []
        for index, (name, check) in enumerate(suites):
            if only and name not in only:
                continue
            try:
                result = check(derive_seed(seed, index))
            except SublinearError as e:
                result = CheckResult(name=name, passed=False, detail=f"{type(e).__name__}: {e}")
            level = logging.INFO if result.passed else logging.ERROR
            logger.log(level, "%-20s %s  %s", name, "ok" if result.passed else "FAILED", result.detail)
            results.append(result)
        return results

    def run_or_raise(self, seed: int = 0, only: Optional[List[str]] = None) -> List[CheckResult]:
        results = self.run(seed, only)
        failed = [r.name for r in results if not r.passed]
        if failed:
            raise VerificationError(f"invariant checks failed: {', '.join(failed)}")
        return results


verification_service = VerificationService()
