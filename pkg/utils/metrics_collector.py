#!/usr/bin/env python3
"""
Metrics Collection Utilities
============================

Collect and aggregate integration metrics (right-hand-side evaluations,
wall time, norm drift) per pulse role.
"""

import statistics
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional


@dataclass
class MetricPoint:
    """Single metric data point."""
    timestamp: float
    category: str
    metric_type: str
    value: float
    metadata: Dict[str, Any] = field(default_factory=dict)


class MetricsCollector:
    """Collect and aggregate integration metrics."""

    def __init__(self, max_points: int = 10000):
        self.metrics: List[MetricPoint] = []
        self.max_points = max_points

    def record_metric(self, category: str, metric_type: str,
                      value: float, metadata: Optional[Dict[str, Any]] = None) -> None:
        """Record a metric point."""
        self.metrics.append(MetricPoint(
            timestamp=time.time(),
            category=category,
            metric_type=metric_type,
            value=float(value),
            metadata=metadata or {},
        ))
        if len(self.metrics) > self.max_points:
            self.metrics = self.metrics[-self.max_points:]

    def record_integration(self, category: str, rhs_evaluations: int,
                           wall_time: float, norm_drift: float) -> None:
        """Record the three standard numbers of one pulse integration."""
        self.record_metric(category, "rhs_evaluations", rhs_evaluations)
        self.record_metric(category, "wall_time", wall_time)
        self.record_metric(category, "norm_drift", norm_drift)

    def categories(self) -> List[str]:
        return sorted({m.category for m in self.metrics})

    def get_summary(self, category: str) -> Dict[str, Any]:
        """Get summary statistics for one category."""
        by_type: Dict[str, List[float]] = {}
        for metric in self.metrics:
            if metric.category == category:
                by_type.setdefault(metric.metric_type, []).append(metric.value)

        summary: Dict[str, Any] = {}
        for metric_type, values in by_type.items():
            summary[metric_type] = {
                "count": len(values),
                "avg": statistics.mean(values),
                "min": min(values),
                "max": max(values),
                "total": sum(values),
            }
            if len(values) > 1:
                summary[metric_type]["std"] = statistics.stdev(values)
        return summary

    def summary(self) -> Dict[str, Dict[str, Any]]:
        return {category: self.get_summary(category) for category in self.categories()}

    def export_metrics(self) -> List[Dict[str, Any]]:
        """Export all metrics as JSON-serializable dicts."""
        return [asdict(metric) for metric in self.metrics]
