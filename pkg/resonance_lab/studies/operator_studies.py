import logging
from typing import List

import numpy as np

from resonance_lab.models import CheckResult, StudyName, StudyOutcome, StudySpec
from resonance_lab.pseudoproduct import (
    bilinear_apply,
    bilinear_integral,
    cm_norm_probe,
    derivative_product_constant,
    cutoff_families,
    frac_integrate,
    holder_smoke,
    fractional_integration_ratio,
    oscillatory_bilinear_sup,
    trilinear_integral,
)
from resonance_lab.resonance import sample_homogeneity_error
from resonance_lab.spectral import (
    Grid,
    SpectralField,
    gaussian_field,
    measure_bernstein_constant,
    random_smooth_field,
    transform,
)
from resonance_lab.symbols import SymbolCategory, symbol_registry
from resonance_lab.utils import make_rng
from .base_study import BaseStudy, StudySchema

logger = logging.getLogger(__name__)

# (p, q, alpha) with 0 <= 1/q - 1/p < alpha / d in d = 1
FRACTIONAL_TRIPLES = ((np.inf, 2.0, 3.0), (2.0, 2.0, 2.0), (4.0, 2.0, 1.0))
PRODUCT_ORDERS = tuple(range(5))
PRODUCT_TIMES = (1.0, 10.0, 100.0)
PRODUCT_PAIRS = 3
PARTITION_SAMPLES = 2000
HOLDER_PAIRS = 100
BERNSTEIN_FIELDS = 100


class OperatorSuiteStudy(BaseStudy):
    """Pseudo-product exactness, fractional integration ratios and multiplier probes"""

    def _setup_schema(self) -> None:
        self.schema = StudySchema(
            name=StudyName.OPERATOR_SUITE.value,
            display_name="Operator Suite",
            description="Exercise the bilinear and trilinear pseudo-products and the fractional-integration bounds",
            defaults={"grid_product": [128, 64.0], "grid_fractional": [1024, 512.0], "grid_derivative_product": [256, 64.0],
                      "samples": 200},
            checks=["bilinear_identity", "trilinear_identity", "frac_identity", "fractional_ratio_{i}",
                    "derivative_product_k{k}", "partition_{kind}", "homogeneity_{symbol}", "cm_{symbol}",
                    "cm_time_spread", "bernstein_constant", "holder_smoke", "oscillatory_sup_slope"],
            columns=["kind", "label", "t", "value"],
        )

    def run(self, spec: StudySpec, rng: np.random.Generator) -> StudyOutcome:
        checks: List[CheckResult] = []
        rows: List[dict] = []
        summary: dict = {}
        samples = min(spec.samples, 1000) if "samples" in spec.model_fields_set else 200

        grid = self.grid_for(spec, 128 if spec.dim == 1 else 32, 64.0)
        checks.extend(self._identities(grid, rng))
        checks.extend(self._fractional(rows, summary))
        checks.extend(self._derivative_products(rng, rows, summary))
        checks.extend(self._partitions(rng))
        checks.extend(self._probes(samples, rng, summary))
        checks.append(self._cm_time_sweep(samples, rng, rows, summary))
        checks.append(self._bernstein(rng, summary))

        f = random_smooth_field(grid, rng, bandwidth=0.4)
        # the pair count is fixed; the grid shrinks instead
        smoke_grid = Grid(dim=1, n_per_axis=64, box_length=32.0) if spec.dim == 1 \
            else Grid(dim=2, n_per_axis=16, box_length=16.0)
        smoke = holder_smoke(symbol_registry.require("Q4_over_A"), smoke_grid, pairs=HOLDER_PAIRS, t=10.0,
                             rng=rng, bandwidth=0.4)
        summary["holder_smoke"] = {"pairs": HOLDER_PAIRS, "n_per_axis": smoke_grid.n_per_axis, "ratio": smoke}
        checks.append(self.bound_check("holder_smoke", smoke, 1e3,
                                       f"||T_m(f, g)||_2 / (CM ||f||_4 ||g||_4), Q4/A at t=10, {HOLDER_PAIRS} pairs",
                                       recorded=True))

        times = np.geomspace(1.0, 100.0, 9)
        oscillatory = oscillatory_bilinear_sup(f, f, times)
        rows.extend({"kind": "oscillatory_sup", "label": "f,f", "t": t, "value": v}
                    for t, v in zip(oscillatory.times, oscillatory.norms))
        checks.append(self.recorded("oscillatory_sup_slope", oscillatory.slope,
                                    "decay of the raw Duhamel integral, dimension bound"))
        return StudyOutcome(study=StudyName.OPERATOR_SUITE, checks=checks, rows=rows, summary=summary)

    def _identities(self, grid: Grid, rng: np.random.Generator) -> List[CheckResult]:
        """m = 1 quadrature against pointwise products, and frac_integrate at alpha = 0"""
        f, g = (random_smooth_field(grid, rng, bandwidth=0.4) for _ in range(2))
        one = symbol_registry.require("one")
        direct = bilinear_apply(one, f, g, 1.0).values
        quadrature = bilinear_integral(one, f, g, 1.0) * (2.0 * np.pi) ** (-grid.dim / 2.0)
        bilinear_error = float(np.max(np.abs(quadrature - direct)) / np.max(np.abs(direct)))

        identity = frac_integrate(f, 0.0, 5.0)
        frac_error = float(np.max(np.abs(identity.values - f.values)) / np.max(np.abs(f.values)))
        checks = [
            self.bound_check("bilinear_identity", bilinear_error, 1e-10, "m = 1 quadrature vs f g"),
            self.bound_check("frac_identity", frac_error, 1e-14, "alpha = 0"),
        ]
        if grid.dim == 1:
            small = Grid(dim=1, n_per_axis=64, box_length=32.0)
            a, b, c = (random_smooth_field(small, rng, bandwidth=0.4) for _ in range(3))
            # phi1 + phi2 + phi3 = 1, so the three pieces must rebuild the pointwise triple product
            pieces = sum(trilinear_integral(symbol_registry.require(f"phi{i}"), a, b, c, np.inf) for i in (1, 2, 3))
            product = a.to_physical().values * b.to_physical().values * c.to_physical().values
            reference = transform(SpectralField.physical(small, product), "forward").values
            error = float(np.max(np.abs(pieces * (2.0 * np.pi) ** -1.0 - reference)) / np.max(np.abs(reference)))
            checks.append(self.bound_check("trilinear_identity", error, 1e-10, "phi1+phi2+phi3 pieces vs f g h"))
        return checks

    def _fractional(self, rows: List[dict], summary: dict) -> List[CheckResult]:
        grid = Grid(dim=1, n_per_axis=1024, box_length=512.0)
        field = gaussian_field(grid, width=1.0)
        times = np.geomspace(1.0, 100.0, 9)
        checks, recorded = [], {}
        for i, (p, q, alpha) in enumerate(FRACTIONAL_TRIPLES):
            ratios = fractional_integration_ratio(field, p, q, alpha, times)
            label = f"p={p},q={q},alpha={alpha}"
            recorded[label] = ratios
            rows.extend({"kind": "fractional_ratio", "label": label, "t": t, "value": r}
                        for t, r in zip(times, ratios))
            growth = max(ratios) / ratios[0]
            checks.append(self.bound_check(f"fractional_ratio_{i}", growth, 10.0,
                                           f"{label}: max ratio over its t = 1 value"))
        summary["fractional_ratios"] = recorded
        return checks

    def _derivative_products(self, rng: np.random.Generator, rows: List[dict], summary: dict) -> List[CheckResult]:
        """Largest Q_k/A product constant over random pairs, per t, for k = 0..4"""
        grid = Grid(dim=1, n_per_axis=256, box_length=64.0)
        pairs = [(random_smooth_field(grid, rng, bandwidth=1.0), random_smooth_field(grid, rng, bandwidth=1.0))
                 for _ in range(PRODUCT_PAIRS)]
        checks, recorded = [], {}
        for k in PRODUCT_ORDERS:
            constants = [max(derivative_product_constant(k, f, g, t) for f, g in pairs) for t in PRODUCT_TIMES]
            recorded[k] = constants
            rows.extend({"kind": "derivative_product_constant", "label": f"k={k}", "t": t, "value": c}
                        for t, c in zip(PRODUCT_TIMES, constants))
            spread = max(constants) / min(constants)
            checks.append(self.bound_check(f"derivative_product_k{k}", spread, 10.0, "max/min over t in {1, 10, 100}"))
        summary["derivative_product_constants"] = recorded
        return checks

    def _partitions(self, rng: np.random.Generator) -> List[CheckResult]:
        checks = []
        for kind in ("Psi2", "PsiTilde2", "Phi3"):
            family = cutoff_families(kind)
            arity = family[0].arity
            points = [rng.standard_normal((PARTITION_SAMPLES, 1)) for _ in range(arity)]
            total = sum(symbol(*points) for symbol in family)
            checks.append(self.bound_check(f"partition_{kind}", float(np.max(np.abs(total - 1.0))), 1e-12,
                                           f"sum of the {kind} family"))
        return checks

    def _probes(self, samples: int, rng: np.random.Generator, summary: dict) -> List[CheckResult]:
        """Homogeneity of every homogeneous symbol in the 1/t = 0 limit and recorded CM norms"""
        checks, probes = [], {}
        for name in symbol_registry.get_symbol_names():
            symbol = symbol_registry.require(name)
            if symbol.homogeneity_degree is not None and symbol.constant is None:
                error = sample_homogeneity_error(lambda *args: symbol(*args, t=np.inf), symbol.homogeneity_degree,
                                                 1, symbol.arity, rng=rng)
                checks.append(self.bound_check(f"homogeneity_{name}", error, 1e-9,
                                               f"degree {symbol.homogeneity_degree:g} at 1/t = 0"))
            if symbol.category in (SymbolCategory.CUTOFF, SymbolCategory.NEGATIVE_DEGREE) \
                    and symbol.homogeneity_degree == 0.0:
                probe = cm_norm_probe(symbol, max_order=2, samples=samples, rng=rng)
                probes[name] = probe.model_dump()
                checks.append(self.recorded(f"cm_{name}", probe.value, f"shell spread {probe.shell_spread():.3g}"))
        summary["cm_probes"] = probes
        return checks

    def _cm_time_sweep(self, samples: int, rng: np.random.Generator, rows: List[dict], summary: dict) -> CheckResult:
        """CM norms of the t-uniform symbol at finite times, same sample points at every t"""
        seed = int(rng.integers(2 ** 32))
        symbol = symbol_registry.require("cm_normalized_Q4_over_A")
        values = [cm_norm_probe(symbol, max_order=2, samples=samples, t=t, rng=make_rng(seed)).value
                  for t in PRODUCT_TIMES]
        rows.extend({"kind": "cm_norm", "label": symbol.name, "t": t, "value": v} for t, v in zip(PRODUCT_TIMES, values))
        summary["cm_time_sweep"] = {symbol.name: dict(zip(PRODUCT_TIMES, values))}
        spread = max(values) / min(values)
        return self.bound_check("cm_time_spread", spread, 2.0, f"{symbol.name}: max/min over t in {{1, 10, 100}}")

    def _bernstein(self, rng: np.random.Generator, summary: dict) -> CheckResult:
        """||P_{<=2} f||_2 <= C 2^{(1 - 1/2)2} ||f||_1 over random band-limited fields in d = 1"""
        grid = Grid(dim=1, n_per_axis=256, box_length=64.0)
        constant = measure_bernstein_constant(grid, j=2, p=1.0, q=2.0, samples=BERNSTEIN_FIELDS, rng=rng)
        summary["bernstein_constant"] = {"j": 2, "p": 1.0, "q": 2.0, "fields": BERNSTEIN_FIELDS, "value": constant}
        return self.bound_check("bernstein_constant", constant, 10.0, f"(p, q) = (1, 2), {BERNSTEIN_FIELDS} fields")
