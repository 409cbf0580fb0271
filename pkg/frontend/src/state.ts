/** View state and transitions.
 *
 * The selected cell always reflects the most recent probe request: each
 * request takes a monotonically increasing sequence number and a response
 * is accepted only if it carries the latest one, so a slow earlier reply
 * can never overwrite a newer selection (no stale mixing).
 */

import { WhatIfResponse } from "./types.js";

export const MAX_PINS = 4;

export interface PinnedCell {
  key: string;
  probe: WhatIfResponse;
}

export interface ViewState {
  family: string;
  deltaAlpha: number;
  deltaCov: number;
  mu: number;
  lambda: number;
  probe: WhatIfResponse | null;
  probeSeq: number;
  acceptedSeq: number;
  pinned: PinnedCell[];
}

export function initialState(family: string, delta: number, mu: number): ViewState {
  return {
    family,
    deltaAlpha: delta,
    deltaCov: delta,
    mu,
    lambda: 0.25,
    probe: null,
    probeSeq: 0,
    acceptedSeq: 0,
    pinned: [],
  };
}

export function selectCell(
  state: ViewState,
  family: string,
  deltaAlpha: number,
  deltaCov: number,
): ViewState {
  return { ...state, family, deltaAlpha, deltaCov };
}

/** Reserve a sequence number for an outgoing probe request. */
export function beginProbe(state: ViewState): { state: ViewState; seq: number } {
  const seq = state.probeSeq + 1;
  return { state: { ...state, probeSeq: seq }, seq };
}

/** Accept a response only if it is the newest in flight. */
export function acceptProbe(
  state: ViewState,
  seq: number,
  probe: WhatIfResponse,
): ViewState {
  if (seq < state.probeSeq || seq <= state.acceptedSeq) {
    return state; // superseded by a newer request or an already-newer answer
  }
  return { ...state, probe, acceptedSeq: seq };
}

export function cellKey(probe: WhatIfResponse): string {
  return `${probe.family}|${probe.delta_alpha}|${probe.delta_cov}`;
}

/** Pin the current probe for side-by-side comparison (at most MAX_PINS,
 * deduplicated by cell). */
export function pinCurrent(state: ViewState): ViewState {
  if (state.probe === null) return state;
  const key = cellKey(state.probe);
  if (state.pinned.some((p) => p.key === key)) return state;
  if (state.pinned.length >= MAX_PINS) return state;
  return { ...state, pinned: [...state.pinned, { key, probe: state.probe }] };
}

export function unpin(state: ViewState, key: string): ViewState {
  return { ...state, pinned: state.pinned.filter((p) => p.key !== key) };
}
