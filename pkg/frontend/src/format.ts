/** Display formatting. Rates and coverages show three decimals, utilities
 * four, deltas two. A null miss rate renders as "n/a", never as a zero. */

export function fmtRate(value: number | null | undefined): string {
  if (value === null || value === undefined) return "n/a";
  return value.toFixed(3);
}

export function fmtUtility(value: number): string {
  return value.toFixed(4);
}

export function fmtDelta(value: number): string {
  return value.toFixed(2);
}

export function fmtCount(value: number): string {
  return String(value);
}
