/** Wire types for the run API. Every number shown in the UI comes from
 * one of these responses; the client only formats, never re-derives. */

export interface Thresholds {
  t_alpha: [number, number];
  t_cov: [number, number];
}

export interface RunMeta {
  rho: number;
  deltas: number[];
  families: string[];
  thresholds: Thresholds;
  abnormality_rule: Record<string, unknown> | null;
  n_pairs: number;
  n_labeled_pairs: number;
  mu_list: number[] | null;
  lambda_grid: number[] | null;
  calibrators: Record<string, unknown>;
  envelope_note: string;
}

export interface GridCell {
  family: string;
  delta_alpha: number;
  delta_cov: number;
  n_pairs: number;
  n_us_only: number;
  n_missed: number;
  us_only_rate: number;
  xr_use: number;
  miss_rate: number | null;
  cov_alpha: number;
  cov_cov: number;
  utility?: number;
}

export interface GridResponse {
  family: string;
  deltas: number[];
  cells: GridCell[];
}

export interface CurvePoint {
  lambda: number;
  mu: number;
  utility: number;
  best_family: string;
  best_delta_alpha: number | null;
  best_delta_cov: number | null;
  baseline_all: number;
  baseline_none: number;
}

export interface CurveResponse {
  mu: number;
  note: string;
  points: CurvePoint[];
}

export interface Histogram {
  edges: number[];
  counts: number[];
  n_nonfinite: number;
}

export interface WhatIfMetrics {
  n_pairs: number;
  n_us_only: number;
  n_missed: number;
  us_only_rate: number;
  xr_use: number;
  miss_rate: number | null;
  cov_alpha: number;
  cov_cov: number;
}

export interface WhatIfRequest {
  family: string;
  delta_alpha: number;
  delta_cov: number;
  lambda: number;
  mu: number;
}

export interface WhatIfResponse {
  family: string;
  delta_alpha: number;
  delta_cov: number;
  lambda: number;
  mu: number;
  source: "grid" | "calibrators";
  metrics: WhatIfMetrics;
  utility: number;
  baseline_all: number;
  baseline_none: number;
  margins: { alpha: Histogram; coverage: Histogram };
}
