/** Decision-curve view model: envelope polyline plus baselines, with an
 * optional probe marker at the currently explored (lambda, utility). */

import { CurvePoint } from "./types.js";

export interface Scale {
  min: number;
  max: number;
  toPx: (v: number) => number;
}

export interface CurveModel {
  mu: number;
  envelope: string; // SVG polyline points
  baselineAll: string;
  baselineNone: string;
  x: Scale;
  y: Scale;
  marker: { x: number; y: number } | null;
}

const WIDTH = 460;
const HEIGHT = 330;
const PAD = 50;

function makeScale(min: number, max: number, lo: number, hi: number): Scale {
  const span = max - min || 1;
  return { min, max, toPx: (v: number) => lo + ((v - min) / span) * (hi - lo) };
}

export function buildCurve(
  points: CurvePoint[],
  mu: number,
  probe?: { lambda: number; utility: number },
): CurveModel {
  const xs = points.map((p) => p.lambda);
  const ys = points.flatMap((p) => [p.utility, p.baseline_all, p.baseline_none]);
  if (probe) ys.push(probe.utility);
  const x = makeScale(Math.min(...xs), Math.max(...xs), PAD, WIDTH - PAD);
  const y = makeScale(Math.min(...ys), Math.max(...ys), HEIGHT - PAD, PAD);
  const line = (pick: (p: CurvePoint) => number) =>
    points.map((p) => `${x.toPx(p.lambda).toFixed(1)},${y.toPx(pick(p)).toFixed(1)}`).join(" ");
  return {
    mu,
    envelope: line((p) => p.utility),
    baselineAll: line((p) => p.baseline_all),
    baselineNone: line((p) => p.baseline_none),
    x,
    y,
    marker: probe ? { x: x.toPx(probe.lambda), y: y.toPx(probe.utility) } : null,
  };
}

export function renderCurveSVG(model: CurveModel): string {
  const parts = [
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${WIDTH} ${HEIGHT}" ` +
      `font-family="sans-serif" font-size="11">`,
    `<text x="${WIDTH / 2}" y="16" text-anchor="middle" font-size="13">` +
      `Decision-curve envelope (mu=${model.mu})</text>`,
    `<line x1="${PAD}" y1="${HEIGHT - PAD}" x2="${WIDTH - PAD}" y2="${HEIGHT - PAD}" stroke="#333"/>`,
    `<line x1="${PAD}" y1="${PAD}" x2="${PAD}" y2="${HEIGHT - PAD}" stroke="#333"/>`,
    `<text x="${WIDTH / 2}" y="${HEIGHT - 8}" text-anchor="middle">lambda (radiation cost)</text>`,
    `<text x="12" y="${HEIGHT / 2}" text-anchor="middle" transform="rotate(-90 12 ${HEIGHT / 2})">mean utility</text>`,
    `<text x="${PAD}" y="${HEIGHT - PAD + 14}" text-anchor="middle">${model.x.min.toFixed(2)}</text>`,
    `<text x="${WIDTH - PAD}" y="${HEIGHT - PAD + 14}" text-anchor="middle">${model.x.max.toFixed(2)}</text>`,
    `<text x="${PAD - 4}" y="${HEIGHT - PAD + 4}" text-anchor="end">${model.y.min.toFixed(2)}</text>`,
    `<text x="${PAD - 4}" y="${PAD + 4}" text-anchor="end">${model.y.max.toFixed(2)}</text>`,
    `<polyline points="${model.baselineAll}" fill="none" stroke="#bbb" stroke-dasharray="5 3"/>`,
    `<polyline points="${model.baselineNone}" fill="none" stroke="#888" stroke-dasharray="2 3"/>`,
    `<polyline points="${model.envelope}" fill="none" stroke="#1f77b4" stroke-width="2"/>`,
    `<text x="${WIDTH - PAD}" y="${PAD + 10}" text-anchor="end" fill="#1f77b4">envelope</text>`,
    `<text x="${WIDTH - PAD}" y="${PAD + 24}" text-anchor="end" fill="#bbb">acquire-all</text>`,
    `<text x="${WIDTH - PAD}" y="${PAD + 38}" text-anchor="end" fill="#888">acquire-none</text>`,
  ];
  if (model.marker) {
    parts.push(
      `<circle cx="${model.marker.x.toFixed(1)}" cy="${model.marker.y.toFixed(1)}" r="5" ` +
        `fill="#e6550d" stroke="#fff"/>`,
    );
  }
  parts.push("</svg>");
  return parts.join("\n");
}
