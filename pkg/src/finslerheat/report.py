"""Plain-text, CSV and SVG artefacts for Varadhan reports."""

from __future__ import annotations

import csv
import math
from pathlib import Path

from .varadhan import LpFamilyResult, OrientationResult, VaradhanReport

_COLORS = ("#1f77b4", "#d62728")


def _write_rows(o: OrientationResult, path: Path) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "P_t", "V_t", "bound_rhs", "slack"])
        for r in sorted(o.rows, key=lambda r: r.t):
            w.writerow([repr(r.t), repr(r.P_t), repr(r.V_t), repr(r.bound_rhs), repr(r.slack)])


def summary_lines(report: VaradhanReport, tolerance: float | None = None) -> list[str]:
    lines = [f"{k}: {v}" for k, v in report.description.items()]
    lines += [
        f"h: {report.h:.6g}",
        f"kappa: {report.kappa:.6g}",
        f"extrapolation: {report.extrapolation}",
    ]
    for o in report.orientations:
        tag = o.label
        lines += [
            f"[{tag}] d (eikonal): {o.d:.6g}",
            f"[{tag}] d (dijkstra): {o.d_oracle:.6g}",
            f"[{tag}] m(source), m(target): {o.m_source:.6g}, {o.m_target:.6g}",
            f"[{tag}] target d^2: {o.target:.6g}",
            f"[{tag}] V_extrap: {o.V_extrap:.6g}",
            f"[{tag}] rel_error: {o.rel_error:.4%}",
        ]
        for method, v in o.extrapolations.items():
            lines.append(f"[{tag}] V_extrap[{method}]: {v:.6g} ({abs(v - o.target) / o.target:.3%})")
        lines += [
            f"[{tag}] rows: {len(o.rows)} dropped: {len(o.dropped)}"
            + (f" (t = {', '.join(f'{t:g}' for t in o.dropped)})" if o.dropped else ""),
            f"[{tag}] upper bound violations: {o.violations}",
            f"[{tag}] seconds: {o.seconds:.1f}",
        ]
    if report.backward is not None:
        lines.append(f"d_AB^2 / d_BA^2: {report.forward.target / report.backward.target:.6g}")
        if report.backward.V_extrap > 0:
            lines.append(f"V_extrap ratio A->B / B->A: {report.forward.V_extrap / report.backward.V_extrap:.6g}")
    if tolerance is not None:
        for o in report.orientations:
            lines.append(f"[{o.label}] within {tolerance:.0%}: {o.rel_error <= tolerance}")
        if report.backward is not None:
            lines.append(f"orientation distinguished at {tolerance:.0%}: {report.distinguished(tolerance)}")
    return lines


def _svg_plot(report: VaradhanReport) -> str:
    """``V(t)`` against ``log t`` with one horizontal reference line per
    orientation at its ``d^2``."""
    width, height, pad = 640, 420, 60
    orients = report.orientations
    ts = [r.t for o in orients for r in o.rows]
    vs = [r.V_t for o in orients for r in o.rows] + [o.target for o in orients]
    lx0, lx1 = math.log10(min(ts)), math.log10(max(ts))
    if lx1 - lx0 < 1e-12:
        lx0, lx1 = lx0 - 0.5, lx1 + 0.5
    v0, v1 = 0.0, max(vs) * 1.1

    def px(t):
        return pad + (math.log10(t) - lx0) / (lx1 - lx0) * (width - 2 * pad)

    def py(v):
        return height - pad - (v - v0) / (v1 - v0) * (height - 2 * pad)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
        f'<text x="{width / 2}" y="{height - 15}" text-anchor="middle" font-size="14">t (log scale)</text>',
        f'<text x="18" y="{height / 2}" text-anchor="middle" font-size="14" '
        f'transform="rotate(-90 18 {height / 2})">V(t) = -2 t log P_t</text>',
    ]
    for k in range(math.floor(lx0), math.ceil(lx1) + 1):
        if lx0 - 1e-9 <= k <= lx1 + 1e-9:
            x = px(10.0**k)
            out.append(f'<text x="{x:.1f}" y="{height - pad + 18}" text-anchor="middle" font-size="12">1e{k}</text>')
    for j in range(5):
        v = v0 + (v1 - v0) * j / 4
        out.append(f'<text x="{pad - 6}" y="{py(v) + 4:.1f}" text-anchor="end" font-size="12">{v:.3g}</text>')
    for o, color in zip(orients, _COLORS):
        y = py(o.target)
        out.append(
            f'<line class="reference" x1="{pad}" y1="{y:.2f}" x2="{width - pad}" y2="{y:.2f}" '
            f'stroke="{color}" stroke-dasharray="6,4"/>'
        )
        rows = sorted(o.rows, key=lambda r: r.t)
        pts = " ".join(f"{px(r.t):.2f},{py(r.V_t):.2f}" for r in rows)
        out.append(f'<polyline class="series" points="{pts}" fill="none" stroke="{color}"/>')
        for r in rows:
            out.append(f'<circle cx="{px(r.t):.2f}" cy="{py(r.V_t):.2f}" r="3" fill="{color}"/>')
        out.append(
            f'<text x="{width - pad - 4}" y="{y - 6:.2f}" text-anchor="end" font-size="12" fill="{color}">'
            f"{o.label}: d^2 = {o.target:.4g}</text>"
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_report(report: VaradhanReport, directory, tolerance: float | None = None) -> list[Path]:
    """Write ``varadhan.csv`` (and ``varadhan_reverse.csv`` for the reverse
    orientation), ``summary.txt`` and ``varadhan.svg``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths = [d / "varadhan.csv"]
    _write_rows(report.forward, paths[0])
    if report.backward is not None:
        paths.append(d / "varadhan_reverse.csv")
        _write_rows(report.backward, paths[-1])
    paths.append(d / "summary.txt")
    paths[-1].write_text("\n".join(summary_lines(report, tolerance)) + "\n")
    paths.append(d / "varadhan.svg")
    paths[-1].write_text(_svg_plot(report))
    return paths


def emit_lp_family(result: LpFamilyResult, directory) -> list[Path]:
    """One report directory per ``(p, eps)`` plus ``lp_family.csv``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths = []
    table = d / "lp_family.csv"
    with table.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["p", "eps", "d_eps", "d_dijkstra", "d_lp_reference", "P_t_max", "V_extrap", "violations"])
        for (p, eps), rep in result.reports.items():
            o = rep.forward
            top = max(o.rows, key=lambda r: r.t)
            w.writerow([repr(p), repr(eps), repr(o.d), repr(o.d_oracle), repr(result.lp_reference[p]),
                        repr(top.P_t), repr(o.V_extrap), o.violations])
            sub = d / f"p{p:g}_eps{eps:g}"
            paths += emit_report(rep, sub)
    paths.append(table)
    lines = []
    for p in result.monotone:
        lines.append(f"p={p:g} d_eps monotone in eps (tol {result.monotone_tol:g}): {result.monotone[p]}")
        if p in result.stability:
            lines.append(
                f"p={p:g} relative change of P at t_max between the two smallest eps: "
                f"{result.stability[p]:.4%} (limit {result.stability_tol:.0%})"
            )
    lines.append(f"upper bound holds for every (p, eps): {result.bound_ok}")
    (d / "summary.txt").write_text("\n".join(lines) + "\n")
    paths.append(d / "summary.txt")
    return paths
