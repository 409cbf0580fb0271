/** Linked heatmap models for US-only rate and miss rate over the
 * (delta_alpha, delta_cov) grid. Cells with an undefined miss rate (no
 * US-only decisions) are hatched and labeled "n/a"; they are visually
 * distinct from a true 0 in every view. */

import { GridCell } from "./types.js";
import { fmtDelta, fmtRate } from "./format.js";

export type HeatmapMetric = "us_only_rate" | "miss_rate";

export interface CellModel {
  deltaAlpha: number;
  deltaCov: number;
  value: number | null;
  label: string;
  hatched: boolean;
  fill: string;
  selected: boolean;
  pinned: boolean;
}

export interface HeatmapModel {
  metric: HeatmapMetric;
  deltas: number[];
  rows: CellModel[][]; // indexed [delta_alpha][delta_cov]
}

const LOW: [number, number, number] = [247, 251, 255];
const HIGH: [number, number, number] = [8, 48, 107];

export function colorFor(value: number, vmin: number, vmax: number): string {
  const t = vmax <= vmin ? 0 : (value - vmin) / (vmax - vmin);
  const mix = (i: number) => Math.round(LOW[i]! + t * (HIGH[i]! - LOW[i]!));
  return `rgb(${mix(0)},${mix(1)},${mix(2)})`;
}

export function buildHeatmap(
  cells: GridCell[],
  deltas: number[],
  metric: HeatmapMetric,
  selected?: { deltaAlpha: number; deltaCov: number },
  pinned: { deltaAlpha: number; deltaCov: number }[] = [],
): HeatmapModel {
  const values = cells
    .map((c) => c[metric])
    .filter((v): v is number => v !== null && v !== undefined);
  const vmin = values.length ? Math.min(...values) : 0;
  const vmax = values.length ? Math.max(...values) : 1;
  const byKey = new Map(cells.map((c) => [`${c.delta_alpha}|${c.delta_cov}`, c]));

  const rows = deltas.map((da) =>
    deltas.map((dc) => {
      const cell = byKey.get(`${da}|${dc}`);
      const raw = cell ? cell[metric] : null;
      const value = raw === undefined ? null : raw;
      const isSelected =
        selected !== undefined && selected.deltaAlpha === da && selected.deltaCov === dc;
      const isPinned = pinned.some((p) => p.deltaAlpha === da && p.deltaCov === dc);
      return {
        deltaAlpha: da,
        deltaCov: dc,
        value,
        label: fmtRate(value),
        hatched: value === null,
        fill: value === null ? "url(#hatch)" : colorFor(value, vmin, vmax),
        selected: isSelected,
        pinned: isPinned,
      };
    }),
  );
  return { metric, deltas, rows };
}

const CELL = 52;
const MARGIN = 64;

/** Render a heatmap model as an SVG string. Cells carry data attributes so
 * the click handler can map them back to grid coordinates. */
export function renderHeatmapSVG(model: HeatmapModel, title: string): string {
  const n = model.deltas.length;
  const width = MARGIN + n * CELL + 16;
  const height = MARGIN + n * CELL + 16;
  const parts: string[] = [
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${width} ${height}" ` +
      `font-family="sans-serif" font-size="11">`,
    `<defs><pattern id="hatch" width="6" height="6" patternUnits="userSpaceOnUse">` +
      `<rect width="6" height="6" fill="#f4f4f4"/>` +
      `<path d="M0,6 L6,0" stroke="#9a9a9a" stroke-width="1"/></pattern></defs>`,
    `<text x="${width / 2}" y="16" text-anchor="middle" font-size="13">${title}</text>`,
    `<text x="${MARGIN + (n * CELL) / 2}" y="${height - 2}" text-anchor="middle" fill="#555">` +
      `delta_cov &#8594;</text>`,
    `<text x="12" y="${MARGIN + (n * CELL) / 2}" text-anchor="middle" fill="#555" ` +
      `transform="rotate(-90 12 ${MARGIN + (n * CELL) / 2})">delta_alpha &#8594;</text>`,
  ];
  model.deltas.forEach((dc, j) => {
    parts.push(
      `<text x="${MARGIN + j * CELL + CELL / 2}" y="${MARGIN - 8}" text-anchor="middle">` +
        `${fmtDelta(dc)}</text>`,
    );
  });
  model.rows.forEach((row, i) => {
    const y = MARGIN + i * CELL;
    parts.push(
      `<text x="${MARGIN - 6}" y="${y + CELL / 2 + 4}" text-anchor="end">` +
        `${fmtDelta(model.deltas[i]!)}</text>`,
    );
    row.forEach((cell, j) => {
      const x = MARGIN + j * CELL;
      const stroke = cell.selected ? "#e6550d" : cell.pinned ? "#31a354" : "#ffffff";
      const strokeWidth = cell.selected || cell.pinned ? 3 : 1;
      parts.push(
        `<rect class="hm-cell" data-da="${cell.deltaAlpha}" data-dc="${cell.deltaCov}" ` +
          `x="${x}" y="${y}" width="${CELL}" height="${CELL}" fill="${cell.fill}" ` +
          `stroke="${stroke}" stroke-width="${strokeWidth}"><title>` +
          `da=${fmtDelta(cell.deltaAlpha)} dc=${fmtDelta(cell.deltaCov)} ` +
          `${model.metric}=${cell.label}</title></rect>`,
      );
      const dark = cell.value !== null && cell.value > 0.6 * (maxValue(model) || 1);
      parts.push(
        `<text x="${x + CELL / 2}" y="${y + CELL / 2 + 4}" text-anchor="middle" ` +
          `pointer-events="none" fill="${dark ? "#fff" : "#222"}">${cell.label}</text>`,
      );
    });
  });
  parts.push("</svg>");
  return parts.join("\n");
}

function maxValue(model: HeatmapModel): number {
  let max = 0;
  for (const row of model.rows) {
    for (const cell of row) {
      if (cell.value !== null && cell.value > max) max = cell.value;
    }
  }
  return max;
}
