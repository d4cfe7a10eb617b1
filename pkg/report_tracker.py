import math

import numpy as np


def _mean_se(values):
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        return float("nan"), float("nan")
    mean = float(np.mean(values))
    if values.size < 2 or not np.all(np.isfinite(values)):
        return mean, float("nan")
    return mean, float(np.std(values, ddof=1) / math.sqrt(values.size))


class ReportTracker:
    """Helper class to aggregate calibration reports per scheme"""

    def __init__(self, database=None):
        self.database = database
        self.se_multiplier = 2.0  # Coverage within this many SEs of nominal counts as valid

    def classify(self, coverage, se, alpha):
        """'valid', 'undercover' or 'unknown' relative to the nominal 1-alpha"""
        if not math.isfinite(coverage):
            return "unknown"
        slack = self.se_multiplier * se if math.isfinite(se) else 0.0
        return "valid" if coverage + slack >= 1.0 - alpha else "undercover"

    def summarize(self, reports):
        """Per (scheme, alpha): mean +- SE of coverage and efficiency over seeds"""
        groups = {}
        for report in reports:
            groups.setdefault((report.scheme, report.alpha), []).append(report)

        summary = {}
        for (scheme, alpha), group in sorted(groups.items()):
            ok = [r for r in group if r.error is None]
            coverage, coverage_se = _mean_se([r.coverage for r in ok])
            efficiency, efficiency_se = _mean_se([r.efficiency for r in ok])
            summary[(scheme, alpha)] = {
                "scheme": scheme,
                "alpha": alpha,
                "runs": len(group),
                "failures": len(group) - len(ok),
                "coverage": coverage,
                "coverage_se": coverage_se,
                "efficiency": efficiency,
                "efficiency_se": efficiency_se,
                "infinite_sets": sum(1 for r in ok if math.isinf(r.efficiency)),
                "status": self.classify(coverage, coverage_se, alpha),
            }
        return summary

    def summarize_stored(self, config_hash):
        """Scheme summary of the rows persisted for one config"""
        if self.database is None:
            return {}
        return self.database.get_scheme_summary(config_hash)

    @staticmethod
    def format_table(summary):
        lines = [f"{'scheme':<20}{'alpha':>7}{'coverage':>18}{'log-volume':>20}{'fail':>6}  status"]
        for row in summary.values():
            lines.append(
                f"{row['scheme']:<20}{row['alpha']:>7.3f}"
                f"{row['coverage']:>10.3f} ± {row['coverage_se']:<5.3f}"
                f"{row['efficiency']:>12.3f} ± {row['efficiency_se']:<5.3f}"
                f"{row['failures']:>6d}  {row['status']}"
            )
        return "\n".join(lines)

    @staticmethod
    def format_stored(stored):
        """Table for summarize_stored(); every run of the config ever written to the database"""
        lines = [f"{'scheme':<20}{'runs':>6}{'fail':>6}{'coverage':>10}{'log-volume':>12}"]
        for scheme, row in stored.items():
            coverage = "-" if row["coverage"] is None else f"{row['coverage']:.3f}"
            efficiency = "-" if row["efficiency"] is None else f"{row['efficiency']:.3f}"
            lines.append(f"{scheme:<20}{row['runs']:>6d}{row['failures']:>6d}{coverage:>10}{efficiency:>12}")
        return "\n".join(lines)
