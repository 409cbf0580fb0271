/** Chosen-operating-point export. Policy adoption is a human act recorded
 * outside the tool; this emits the handoff document. */

import { RunMeta, WhatIfResponse } from "./types.js";

export interface OperatingPoint {
  family: string;
  delta_alpha: number;
  delta_cov: number;
  thresholds: { t_alpha: [number, number]; t_cov: [number, number] };
  rho: number;
  timestamp: string;
}

export function operatingPoint(
  probe: WhatIfResponse,
  meta: RunMeta,
  now: () => Date = () => new Date(),
): OperatingPoint {
  return {
    family: probe.family,
    delta_alpha: probe.delta_alpha,
    delta_cov: probe.delta_cov,
    thresholds: meta.thresholds,
    rho: meta.rho,
    timestamp: now().toISOString(),
  };
}

export function operatingPointJson(
  probe: WhatIfResponse,
  meta: RunMeta,
  now?: () => Date,
): string {
  return JSON.stringify(operatingPoint(probe, meta, now), null, 2);
}
