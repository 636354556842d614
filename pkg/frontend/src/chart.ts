/**
 * Trajectory chart construction and SVG rendering.
 *
 * `buildChartState` maps a prediction response into plain geometry: one series
 * per scenario with its smoothed median curve, shaded interquartile band
 * (dropped when degenerate), knot markers at the scheduled months, and the
 * labeled month-0 anchor.  Every number comes from the response; the chart
 * performs presentation scaling only.  `renderSvg` turns the state into a
 * deterministic SVG string, which is what the snapshot tests freeze.
 */

import type { PredictResponse, ScenarioPayload, Units } from "./types.js";

export const UNIT_LABELS: Record<Units, string> = {
  kg: "Weight (kg)",
  bmi: "BMI (kg/m²)",
  twl: "Total weight loss (%)",
  ewl: "Excess weight loss (%)",
};

export const SERIES_COLORS = ["#1f6fb2", "#c2571a", "#3a8f5d"];

export interface BandSample {
  month: number;
  lo: number;
  hi: number;
}

export interface ChartSeries {
  label: string;
  color: string;
  curve: { month: number; value: number }[];
  knots: { month: number; value: number; lo: number; hi: number }[];
  band: BandSample[] | null; // null when the band is degenerate (lo == hi)
}

export interface ChartState {
  unit: Units;
  unitLabel: string;
  monthMin: number;
  monthMax: number;
  valueMin: number;
  valueMax: number;
  anchor: { month: number; value: number; label: string };
  series: ChartSeries[];
}

export class MalformedResponseError extends Error {}

function checkScenario(payload: ScenarioPayload): void {
  if (!payload || !Array.isArray(payload.points) || payload.points.length === 0) {
    throw new MalformedResponseError("response scenario has no points");
  }
  const curve = payload.curve;
  if (
    !curve ||
    !Array.isArray(curve.months) ||
    curve.months.length !== curve.value.length ||
    curve.months.length !== curve.lo.length ||
    curve.months.length !== curve.hi.length
  ) {
    throw new MalformedResponseError("response curve arrays are inconsistent");
  }
  if (payload.points[0].month !== 0) {
    throw new MalformedResponseError("response is missing the month-0 anchor");
  }
}

export function buildChartState(
  response: PredictResponse,
  labels?: string[],
): ChartState {
  if (!response || !Array.isArray(response.scenarios) || response.scenarios.length === 0) {
    throw new MalformedResponseError("response has no scenarios");
  }
  response.scenarios.forEach(checkScenario);

  const unit = response.units;
  const series: ChartSeries[] = response.scenarios.map((payload, i) => {
    const curve = payload.curve.months.map((m, k) => ({
      month: m,
      value: payload.curve.value[k],
    }));
    const degenerate = payload.curve.lo.every((lo, k) => lo === payload.curve.hi[k]);
    const band = degenerate
      ? null
      : payload.curve.months.map((m, k) => ({
          month: m,
          lo: payload.curve.lo[k],
          hi: payload.curve.hi[k],
        }));
    return {
      label: labels?.[i] ?? `Scenario ${i + 1}`,
      color: SERIES_COLORS[i % SERIES_COLORS.length],
      curve,
      knots: payload.points.map((p) => ({ month: p.month, value: p.value, lo: p.lo, hi: p.hi })),
      band,
    };
  });

  let lo = Infinity;
  let hi = -Infinity;
  for (const s of series) {
    for (const p of s.curve) {
      lo = Math.min(lo, p.value);
      hi = Math.max(hi, p.value);
    }
    for (const b of s.band ?? []) {
      lo = Math.min(lo, b.lo);
      hi = Math.max(hi, b.hi);
    }
  }
  const pad = (hi - lo || 1) * 0.08;
  const months = series.flatMap((s) => s.curve.map((p) => p.month));
  const anchorValue = series[0].knots[0].value;

  return {
    unit,
    unitLabel: UNIT_LABELS[unit],
    monthMin: 0,
    monthMax: Math.max(60, ...months),
    valueMin: lo - pad,
    valueMax: hi + pad,
    anchor: { month: 0, value: anchorValue, label: `baseline ${fmt(anchorValue)}` },
    series,
  };
}

const WIDTH = 720;
const HEIGHT = 420;
const MARGIN = { left: 56, right: 16, top: 16, bottom: 40 };

function fmt(v: number): string {
  return v.toFixed(1);
}

export function renderSvg(state: ChartState, width = WIDTH, height = HEIGHT): string {
  const plotW = width - MARGIN.left - MARGIN.right;
  const plotH = height - MARGIN.top - MARGIN.bottom;
  const x = (month: number) =>
    MARGIN.left + ((month - state.monthMin) / (state.monthMax - state.monthMin)) * plotW;
  const y = (value: number) =>
    MARGIN.top + (1 - (value - state.valueMin) / (state.valueMax - state.valueMin)) * plotH;
  const px = (v: number) => v.toFixed(2);

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${width} ${height}" ` +
      `role="img" aria-label="Predicted trajectory, ${state.unitLabel}">`,
  );

  // axes
  const x0 = MARGIN.left;
  const yBase = height - MARGIN.bottom;
  parts.push(`<g class="axes" stroke="#444" fill="none">`);
  parts.push(`<line x1="${px(x0)}" y1="${px(MARGIN.top)}" x2="${px(x0)}" y2="${px(yBase)}"/>`);
  parts.push(`<line x1="${px(x0)}" y1="${px(yBase)}" x2="${px(width - MARGIN.right)}" y2="${px(yBase)}"/>`);
  parts.push(`</g>`);
  parts.push(`<g class="x-ticks" font-size="11" text-anchor="middle" fill="#333">`);
  for (const month of [0, 12, 24, 36, 48, 60]) {
    parts.push(`<text x="${px(x(month))}" y="${px(yBase + 16)}">${month}</text>`);
  }
  parts.push(`<text x="${px(MARGIN.left + plotW / 2)}" y="${px(yBase + 32)}">Months after surgery</text>`);
  parts.push(`</g>`);
  const steps = 4;
  parts.push(`<g class="y-ticks" font-size="11" text-anchor="end" fill="#333">`);
  for (let i = 0; i <= steps; i++) {
    const v = state.valueMin + ((state.valueMax - state.valueMin) * i) / steps;
    parts.push(`<text x="${px(x0 - 6)}" y="${px(y(v) + 4)}">${fmt(v)}</text>`);
  }
  parts.push(`</g>`);
  parts.push(
    `<text class="y-label" font-size="12" fill="#333" transform="rotate(-90)" ` +
      `x="${px(-(MARGIN.top + plotH / 2))}" y="14" text-anchor="middle">${state.unitLabel}</text>`,
  );

  // bands first so curves draw on top
  for (const s of state.series) {
    if (!s.band) {
      continue;
    }
    const upper = s.band.map((b) => `${px(x(b.month))},${px(y(b.hi))}`);
    const lower = [...s.band].reverse().map((b) => `${px(x(b.month))},${px(y(b.lo))}`);
    parts.push(
      `<polygon class="band" fill="${s.color}" fill-opacity="0.18" stroke="none" ` +
        `points="${upper.join(" ")} ${lower.join(" ")}"/>`,
    );
  }
  for (const s of state.series) {
    const points = s.curve.map((p) => `${px(x(p.month))},${px(y(p.value))}`).join(" ");
    parts.push(
      `<polyline class="curve" fill="none" stroke="${s.color}" stroke-width="2" points="${points}"/>`,
    );
    for (const k of s.knots) {
      parts.push(
        `<circle class="knot" cx="${px(x(k.month))}" cy="${px(y(k.value))}" r="3.5" ` +
          `fill="${s.color}"><title>month ${k.month}: ${fmt(k.value)} [${fmt(k.lo)}, ${fmt(k.hi)}]</title></circle>`,
      );
    }
  }

  // anchor label and legend
  parts.push(
    `<text class="anchor" font-size="11" fill="#222" x="${px(x(0) + 6)}" ` +
      `y="${px(y(state.anchor.value) - 8)}">${state.anchor.label}</text>`,
  );
  parts.push(`<g class="legend" font-size="12">`);
  state.series.forEach((s, i) => {
    const ly = MARGIN.top + 8 + i * 18;
    const lx = width - MARGIN.right - 170;
    parts.push(`<rect x="${px(lx)}" y="${px(ly - 9)}" width="14" height="10" fill="${s.color}"/>`);
    parts.push(`<text x="${px(lx + 20)}" y="${px(ly)}" fill="#222">${s.label}</text>`);
  });
  parts.push(`</g>`);
  parts.push(`</svg>`);
  return parts.join("\n");
}

/** Error view: shown instead of the chart, never a blank panel. */
export function renderErrorView(message: string, width = WIDTH, height = HEIGHT): string {
  const safe = message.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${width} ${height}" role="alert">` +
    `<rect x="0" y="0" width="${width}" height="${height}" fill="#fff4f4" stroke="#c0392b"/>` +
    `<text x="${width / 2}" y="${height / 2}" text-anchor="middle" fill="#c0392b" font-size="14">` +
    `${safe}</text></svg>`
  );
}
