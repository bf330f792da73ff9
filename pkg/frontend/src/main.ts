// DOM wiring for the scenario explorer.  All rendering goes through the pure
// builders in map.ts / compare.ts / intervene.ts; this file only moves
// strings into the page and handles events.

import { createSession, getLayers, getWhatif, postWhatif, ServiceError } from "./api.js";
import { buildCompareModel, renderComparePanel } from "./compare.js";
import { buildPayload, describeIntervention, validateDraft } from "./intervene.js";
import { renderLegend, renderMap } from "./map.js";
import { Feature, Intervention, LayersPayload, Metric, Summary, ViewState, WhatifPayload } from "./types.js";

const state: ViewState & {
  summary: Summary | null;
  layers: LayersPayload | null;
  whatifs: Map<string, WhatifPayload>;
} = {
  sessionId: null,
  metric: "diversity",
  comparison: "baseline",
  draft: [],
  pending: false,
  summary: null,
  layers: null,
  whatifs: new Map(),
};

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function showError(message: string) {
  el("errors").textContent = message;
}

function activeWhatif(): WhatifPayload | null {
  const c = state.comparison;
  if (c === "baseline") return null;
  const name = "whatif" in c ? c.whatif : c.delta;
  return state.whatifs.get(name) ?? null;
}

async function refreshMap() {
  if (!state.sessionId || !state.summary) return;
  const c = state.comparison;
  try {
    if (c !== "baseline" && "delta" in c) {
      const payload = state.whatifs.get(c.delta);
      state.layers = await getLayers(state.sessionId);
      const view = renderMap(state.layers, state.metric, payload ? payload.deltas : null);
      el("map").innerHTML = view.message ? `<p class="empty">${view.message}</p>` : view.svg;
      el("legend").innerHTML = renderLegend(view.legend);
    } else {
      const name = c !== "baseline" && "whatif" in c ? c.whatif : undefined;
      state.layers = await getLayers(state.sessionId, name);
      const view = renderMap(state.layers, state.metric, null);
      el("map").innerHTML = view.message ? `<p class="empty">${view.message}</p>` : view.svg;
      el("legend").innerHTML = renderLegend(view.legend);
    }
  } catch (err) {
    showError(err instanceof ServiceError ? err.message : String(err));
  }
}

function refreshCompare() {
  if (!state.summary) return;
  const model = buildCompareModel(state.summary, activeWhatif());
  el("compare").innerHTML = renderComparePanel(model);
}

function refreshDraft() {
  const features: Feature[] = state.layers?.features ?? [];
  const problems = validateDraft(state.draft, features);
  el("draft-list").innerHTML = state.draft
    .map((iv, i) => {
      const bad = problems.filter((p) => p.index === i).map((p) => p.message).join("; ");
      return `<li>${describeIntervention(iv)}${bad ? ` <em class="problem">${bad}</em>` : ""}</li>`;
    })
    .join("");
  const submit = el<HTMLButtonElement>("submit-whatif");
  submit.disabled = state.pending || !state.draft.length || problems.length > 0;
  el("draft-problems").textContent = problems.length
    ? "Fix the highlighted interventions before submitting."
    : "";
}

function readDraftForm(): Intervention | null {
  const kind = el<HTMLSelectElement>("iv-kind").value as Intervention["kind"];
  const target = el<HTMLInputElement>("iv-target").value.trim();
  const raw = el<HTMLInputElement>("iv-value").value.trim();
  if (!target) {
    showError("intervention target required (click the map or type a unit id)");
    return null;
  }
  if (kind === "set_transit_flag") {
    const flag = el<HTMLSelectElement>("iv-flag").value as "has_T" | "has_bus";
    return { kind, target, flag, value: raw === "true" };
  }
  const value = Number(raw);
  if (!Number.isFinite(value)) {
    showError("intervention value must be a number");
    return null;
  }
  return { kind, target, value };
}

async function submitWhatif() {
  if (!state.sessionId) return;
  const name = el<HTMLInputElement>("whatif-name").value.trim() || `whatif-${state.whatifs.size + 1}`;
  state.pending = true;
  refreshDraft();
  try {
    const payload = buildPayload(name, state.draft);
    const result = await postWhatif(state.sessionId, payload.name, payload.interventions);
    state.whatifs.set(result.name, result);
    state.comparison = { whatif: result.name };
    state.draft = [];
    updateComparisonOptions();
    refreshCompare();
    await refreshMap();
    showError("");
  } catch (err) {
    showError(err instanceof ServiceError ? err.message : String(err));
  } finally {
    state.pending = false;
    refreshDraft();
  }
}

function updateComparisonOptions() {
  const select = el<HTMLSelectElement>("comparison");
  const options = ['<option value="baseline">baseline</option>'];
  for (const name of state.whatifs.keys()) {
    options.push(`<option value="whatif:${name}">what-if: ${name}</option>`);
    options.push(`<option value="delta:${name}">delta: ${name}</option>`);
  }
  select.innerHTML = options.join("");
}

async function boot() {
  el("create-session").addEventListener("click", async () => {
    const path = el<HTMLInputElement>("scenario-path").value.trim();
    try {
      const created = await createSession(path);
      state.sessionId = created.session_id;
      state.summary = created.summary;
      state.whatifs.clear();
      state.comparison = "baseline";
      updateComparisonOptions();
      refreshCompare();
      await refreshMap();
      refreshDraft();
      showError("");
    } catch (err) {
      showError(err instanceof ServiceError ? err.message : String(err));
    }
  });

  el("metric").addEventListener("change", async (event) => {
    state.metric = (event.target as HTMLSelectElement).value as Metric;
    await refreshMap();
  });

  el("comparison").addEventListener("change", async (event) => {
    const value = (event.target as HTMLSelectElement).value;
    if (value === "baseline") state.comparison = "baseline";
    else if (value.startsWith("whatif:")) state.comparison = { whatif: value.slice(7) };
    else state.comparison = { delta: value.slice(6) };
    if (state.comparison !== "baseline" && "whatif" in state.comparison) {
      const name = state.comparison.whatif;
      if (state.sessionId && !state.whatifs.has(name)) {
        state.whatifs.set(name, await getWhatif(state.sessionId, name));
      }
    }
    refreshCompare();
    await refreshMap();
  });

  el("add-intervention").addEventListener("click", () => {
    const draft = readDraftForm();
    if (draft) {
      state.draft.push(draft);
      refreshDraft();
    }
  });

  el("submit-whatif").addEventListener("click", submitWhatif);

  el("map").addEventListener("click", (event) => {
    const target = (event.target as Element).closest(".unit");
    if (target) {
      el<HTMLInputElement>("iv-target").value = target.getAttribute("data-id") ?? "";
    }
  });
}

document.addEventListener("DOMContentLoaded", boot);
