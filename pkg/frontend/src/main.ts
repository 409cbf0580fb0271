/** Single-page wiring: heatmap pair left, decision curve right, probe
 * panel bottom. Read-only over run artifacts; the only output is the
 * chosen-operating-point JSON export. */

import { ApiClient, ApiError } from "./api.js";
import { buildCurve, renderCurveSVG } from "./curve.js";
import { operatingPointJson } from "./export.js";
import { fmtDelta, fmtRate, fmtUtility } from "./format.js";
import { buildHeatmap, renderHeatmapSVG } from "./heatmap.js";
import { buildPanel, renderHistogramSVG } from "./panel.js";
import {
  ViewState,
  acceptProbe,
  beginProbe,
  initialState,
  pinCurrent,
  selectCell,
  unpin,
} from "./state.js";
import { CurveResponse, GridResponse, RunMeta } from "./types.js";

const api = new ApiClient();

let meta: RunMeta;
let grid: GridResponse | null = null;
let curve: CurveResponse | null = null;
let state: ViewState;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function showBanner(message: string): void {
  const banner = el<HTMLDivElement>("banner");
  banner.textContent = message;
  banner.style.display = "block";
  el<HTMLButtonElement>("retry").style.display = "inline-block";
}

function hideBanner(): void {
  el<HTMLDivElement>("banner").style.display = "none";
  el<HTMLButtonElement>("retry").style.display = "none";
}

function renderHeatmaps(): void {
  if (!grid) return;
  const sel = { deltaAlpha: state.deltaAlpha, deltaCov: state.deltaCov };
  const pins = state.pinned
    .filter((p) => p.probe.family === state.family)
    .map((p) => ({ deltaAlpha: p.probe.delta_alpha, deltaCov: p.probe.delta_cov }));
  el("heatmap-uor").innerHTML = renderHeatmapSVG(
    buildHeatmap(grid.cells, grid.deltas, "us_only_rate", sel, pins),
    "US-only rate",
  );
  el("heatmap-mr").innerHTML = renderHeatmapSVG(
    buildHeatmap(grid.cells, grid.deltas, "miss_rate", sel, pins),
    "Miss rate (hatched: no US-only decisions)",
  );
  for (const container of ["heatmap-uor", "heatmap-mr"]) {
    el(container)
      .querySelectorAll<SVGRectElement>("rect.hm-cell")
      .forEach((rect) => {
        rect.addEventListener("click", () => {
          const da = Number(rect.dataset.da);
          const dc = Number(rect.dataset.dc);
          state = selectCell(state, state.family, da, dc);
          syncDeltaInputs();
          void probe();
        });
      });
  }
}

function renderCurve(): void {
  if (!curve) return;
  const probePoint = state.probe
    ? { lambda: state.probe.lambda, utility: state.probe.utility }
    : undefined;
  el("curve").innerHTML = renderCurveSVG(buildCurve(curve.points, curve.mu, probePoint));
  el("curve-note").textContent = curve.note;
}

function renderPanel(): void {
  const container = el<HTMLDivElement>("panel");
  if (!state.probe) {
    container.innerHTML = "<em>Probe a cell to see its operating point.</em>";
    return;
  }
  const model = buildPanel(state.probe);
  const rows = model.rows
    .map((r) => `<tr><td>${r.label}</td><td class="num">${r.value}</td></tr>`)
    .join("");
  container.innerHTML =
    `<h3>${model.title}</h3><p class="source">${model.source}</p>` +
    `<table>${rows}</table>` +
    `<div class="hists">${renderHistogramSVG(model.marginsAlpha, "alpha margin (deg)")}` +
    `${renderHistogramSVG(model.marginsCov, "coverage margin (pp)")}</div>`;
}

function renderPins(): void {
  const container = el<HTMLDivElement>("pins");
  if (!state.pinned.length) {
    container.innerHTML = "<em>No pinned cells.</em>";
    return;
  }
  container.innerHTML = state.pinned
    .map((pin) => {
      const m = pin.probe.metrics;
      return (
        `<div class="pin"><button data-key="${pin.key}" class="unpin">&#10005;</button>` +
        `<strong>${pin.probe.family}</strong> da=${fmtDelta(pin.probe.delta_alpha)} ` +
        `dc=${fmtDelta(pin.probe.delta_cov)}<br/>` +
        `UOR ${fmtRate(m.us_only_rate)} &middot; MR ${fmtRate(m.miss_rate)} &middot; ` +
        `U ${fmtUtility(pin.probe.utility)}</div>`
      );
    })
    .join("");
  container.querySelectorAll<HTMLButtonElement>("button.unpin").forEach((button) => {
    button.addEventListener("click", () => {
      state = unpin(state, button.dataset.key ?? "");
      renderPins();
      renderHeatmaps();
    });
  });
}

function validProbeInputs(da: number, dc: number): boolean {
  const message = el<HTMLSpanElement>("input-error");
  if (!Number.isFinite(da) || !Number.isFinite(dc) || da < 0 || dc < 0) {
    message.textContent = "inflation factors must be >= 0 (grid spans " +
      `${fmtDelta(meta.deltas[0]!)}..${fmtDelta(meta.deltas[meta.deltas.length - 1]!)})`;
    return false;
  }
  message.textContent = "";
  return true;
}

async function probe(): Promise<void> {
  if (!validProbeInputs(state.deltaAlpha, state.deltaCov)) return;
  const { state: next, seq } = beginProbe(state);
  state = next;
  try {
    const response = await api.whatif({
      family: state.family,
      delta_alpha: state.deltaAlpha,
      delta_cov: state.deltaCov,
      lambda: state.lambda,
      mu: state.mu,
    });
    state = acceptProbe(state, seq, response);
    hideBanner();
    renderPanel();
    renderCurve();
    renderHeatmaps();
  } catch (error) {
    if (error instanceof DOMException && error.name === "AbortError") return;
    if (error instanceof ApiError) {
      showBanner(`probe failed (${error.status}): ${error.message}`);
    } else {
      showBanner("connection failure; the run API is unreachable");
    }
  }
}

async function reloadGrid(): Promise<void> {
  grid = await api.grid(state.family);
  renderHeatmaps();
}

async function reloadCurve(): Promise<void> {
  curve = await api.curve(state.mu);
  renderCurve();
}

function syncDeltaInputs(): void {
  el<HTMLInputElement>("delta-alpha").value = String(state.deltaAlpha);
  el<HTMLInputElement>("delta-cov").value = String(state.deltaCov);
}

async function init(): Promise<void> {
  try {
    meta = await api.meta();
  } catch {
    showBanner("connection failure; the run API is unreachable");
    return;
  }
  hideBanner();
  const firstDelta = meta.deltas[0] ?? 0.1;
  const firstMu = meta.mu_list?.[0] ?? 0.5;
  state = initialState(meta.families[0] ?? "alpha_only", firstDelta, firstMu);

  const familySelect = el<HTMLSelectElement>("family");
  familySelect.innerHTML = meta.families
    .map((f) => `<option value="${f}">${f}</option>`)
    .join("");
  familySelect.addEventListener("change", () => {
    state = selectCell(state, familySelect.value, state.deltaAlpha, state.deltaCov);
    void reloadGrid().then(probe);
  });

  const muSelect = el<HTMLSelectElement>("mu");
  const mus = meta.mu_list ?? [0, 0.5];
  muSelect.innerHTML = mus.map((m) => `<option value="${m}">${m}</option>`).join("");
  muSelect.addEventListener("change", () => {
    state = { ...state, mu: Number(muSelect.value) };
    void reloadCurve().then(probe);
  });

  const lambdaSlider = el<HTMLInputElement>("lambda");
  const lambdaLabel = el<HTMLSpanElement>("lambda-value");
  lambdaSlider.addEventListener("input", () => {
    state = { ...state, lambda: Number(lambdaSlider.value) };
    lambdaLabel.textContent = lambdaSlider.value;
    void probe();
  });
  lambdaLabel.textContent = lambdaSlider.value;
  state = { ...state, lambda: Number(lambdaSlider.value) };

  for (const id of ["delta-alpha", "delta-cov"] as const) {
    const input = el<HTMLInputElement>(id);
    input.addEventListener("change", () => {
      const da = Number(el<HTMLInputElement>("delta-alpha").value);
      const dc = Number(el<HTMLInputElement>("delta-cov").value);
      if (!validProbeInputs(da, dc)) return;
      state = selectCell(state, state.family, da, dc);
      void probe();
    });
  }
  syncDeltaInputs();

  el<HTMLButtonElement>("pin").addEventListener("click", () => {
    state = pinCurrent(state);
    renderPins();
    renderHeatmaps();
  });

  el<HTMLButtonElement>("export").addEventListener("click", () => {
    if (!state.probe) return;
    const blob = new Blob([operatingPointJson(state.probe, meta)], {
      type: "application/json",
    });
    const link = document.createElement("a");
    link.href = URL.createObjectURL(blob);
    link.download = "operating-point.json";
    link.click();
    URL.revokeObjectURL(link.href);
  });

  el<HTMLButtonElement>("retry").addEventListener("click", () => void init());

  el("meta-summary").textContent =
    `rho=${meta.rho}, N=${meta.n_labeled_pairs}/${meta.n_pairs} labeled pairs, ` +
    `thresholds alpha>=${meta.thresholds.t_alpha[0]}, cov>=${meta.thresholds.t_cov[0]}`;

  await reloadGrid();
  await reloadCurve();
  await probe();
  renderPins();
}

void init();
