/** Probe panel view model. Every displayed value is formatted straight
 * from one what-if response; nothing is re-derived client-side. */

import { WhatIfResponse, Histogram } from "./types.js";
import { fmtDelta, fmtRate, fmtUtility } from "./format.js";

export interface PanelRow {
  label: string;
  value: string;
}

export interface PanelModel {
  title: string;
  source: string;
  rows: PanelRow[];
  marginsAlpha: Histogram;
  marginsCov: Histogram;
}

export function buildPanel(probe: WhatIfResponse): PanelModel {
  const m = probe.metrics;
  return {
    title:
      `${probe.family} @ da=${fmtDelta(probe.delta_alpha)} ` +
      `dc=${fmtDelta(probe.delta_cov)}`,
    source: probe.source === "grid" ? "stored grid cell" : "recomputed from calibrators",
    rows: [
      { label: "US-only rate", value: fmtRate(m.us_only_rate) },
      { label: "XR use", value: fmtRate(m.xr_use) },
      { label: "Miss rate", value: fmtRate(m.miss_rate) },
      { label: "Coverage (alpha)", value: fmtRate(m.cov_alpha) },
      { label: "Coverage (cov)", value: fmtRate(m.cov_cov) },
      { label: "Pairs (labeled)", value: String(m.n_pairs) },
      { label: "US-only count", value: String(m.n_us_only) },
      { label: "Missed count", value: String(m.n_missed) },
      {
        label: `Utility (lambda=${probe.lambda}, mu=${probe.mu})`,
        value: fmtUtility(probe.utility),
      },
      { label: "Baseline acquire-all", value: fmtUtility(probe.baseline_all) },
      { label: "Baseline acquire-none", value: fmtUtility(probe.baseline_none) },
    ],
    marginsAlpha: probe.margins.alpha,
    marginsCov: probe.margins.coverage,
  };
}

const HIST_WIDTH = 210;
const HIST_HEIGHT = 90;

export function renderHistogramSVG(hist: Histogram, title: string): string {
  const counts = hist.counts;
  if (!counts.length) {
    return (
      `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${HIST_WIDTH} ${HIST_HEIGHT}" ` +
      `font-family="sans-serif" font-size="10">` +
      `<text x="${HIST_WIDTH / 2}" y="${HIST_HEIGHT / 2}" text-anchor="middle">no finite margins</text></svg>`
    );
  }
  const max = Math.max(...counts, 1);
  const barW = (HIST_WIDTH - 20) / counts.length;
  const bars = counts
    .map((c, i) => {
      const h = ((HIST_HEIGHT - 30) * c) / max;
      const x = 10 + i * barW;
      return `<rect x="${x.toFixed(1)}" y="${(HIST_HEIGHT - 14 - h).toFixed(1)}" width="${(barW - 1).toFixed(1)}" height="${h.toFixed(1)}" fill="#6baed6"/>`;
    })
    .join("");
  const lo = hist.edges[0]!;
  const hi = hist.edges[hist.edges.length - 1]!;
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${HIST_WIDTH} ${HIST_HEIGHT}" ` +
    `font-family="sans-serif" font-size="10">` +
    `<text x="${HIST_WIDTH / 2}" y="10" text-anchor="middle">${title}</text>` +
    bars +
    `<text x="10" y="${HIST_HEIGHT - 2}">${lo.toFixed(1)}</text>` +
    `<text x="${HIST_WIDTH - 10}" y="${HIST_HEIGHT - 2}" text-anchor="end">${hi.toFixed(1)}</text>` +
    `<line x1="10" y1="${HIST_HEIGHT - 14}" x2="${HIST_WIDTH - 10}" y2="${HIST_HEIGHT - 14}" stroke="#555"/>` +
    `</svg>`
  );
}
