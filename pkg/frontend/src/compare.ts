// Side-by-side baseline / what-if panel.  Every number shown comes verbatim
// from the service payloads (shares, commute, deltas); this module only
// formats and lays them out.

import { Summary, WhatifPayload } from "./types.js";

export interface CompareRow {
  mode: string;
  baseline: number;
  whatif: number | null;
  delta: number | null;
}

export interface CompareModel {
  rows: CompareRow[];
  meanCommute: { baseline: number; whatif: number | null; delta: number | null };
  movers: { baseline: number[]; whatif: number[] | null };
  iterations: { baseline: number; whatif: number | null };
  converged: { baseline: boolean; whatif: boolean | null };
}

export function buildCompareModel(baseline: Summary, whatif: WhatifPayload | null): CompareModel {
  const rows: CompareRow[] = Object.keys(baseline.mode_shares).map((mode) => ({
    mode,
    baseline: baseline.mode_shares[mode],
    whatif: whatif ? whatif.summary.mode_shares[mode] : null,
    delta: whatif ? whatif.deltas.mode_shares[mode] : null,
  }));
  return {
    rows,
    meanCommute: {
      baseline: baseline.mean_commute_minutes,
      whatif: whatif ? whatif.summary.mean_commute_minutes : null,
      delta: whatif ? whatif.deltas.mean_commute_minutes : null,
    },
    movers: {
      baseline: baseline.movers,
      whatif: whatif ? whatif.summary.movers : null,
    },
    iterations: {
      baseline: baseline.iterations,
      whatif: whatif ? whatif.summary.iterations : null,
    },
    converged: {
      baseline: baseline.converged,
      whatif: whatif ? whatif.summary.converged : null,
    },
  };
}

export function sharePercent(share: number): string {
  return (100 * share).toFixed(1) + "%";
}

function bar(share: number, cls: string): string {
  const width = Math.round(1000 * Math.max(0, Math.min(1, share))) / 10;
  return `<span class="bar ${cls}" style="width:${width}%"></span>`;
}

export function sparkline(series: number[], width = 160, height = 36): string {
  if (!series.length) return "";
  const max = Math.max(...series, 1);
  const step = series.length > 1 ? width / (series.length - 1) : 0;
  const points = series
    .map((v, i) => `${(i * step).toFixed(1)},${(height - (v / max) * height).toFixed(1)}`)
    .join(" ");
  return `<svg class="spark" viewBox="0 0 ${width} ${height}"><polyline fill="none" ` +
         `stroke="#264653" stroke-width="1.5" points="${points}"/></svg>`;
}

export function renderComparePanel(model: CompareModel): string {
  const header = model.rows.some((r) => r.whatif !== null)
    ? "<tr><th>mode</th><th>baseline</th><th>what-if</th><th>delta</th></tr>"
    : "<tr><th>mode</th><th>baseline</th></tr>";
  const rows = model.rows.map((r) => {
    const cells = [
      `<td class="mode">${r.mode}</td>`,
      `<td class="num" data-field="baseline.${r.mode}">${sharePercent(r.baseline)}${bar(r.baseline, "base")}</td>`,
    ];
    if (r.whatif !== null) {
      cells.push(
        `<td class="num" data-field="whatif.${r.mode}">${sharePercent(r.whatif)}${bar(r.whatif, "variant")}</td>`,
        `<td class="num delta" data-field="delta.${r.mode}">${(100 * (r.delta ?? 0)).toFixed(1)}pp</td>`,
      );
    }
    return `<tr>${cells.join("")}</tr>`;
  });
  const commute = model.meanCommute.whatif !== null
    ? `<p>Mean commute: <b data-field="baseline.mean_commute">${model.meanCommute.baseline.toFixed(1)} min</b>` +
      ` vs <b data-field="whatif.mean_commute">${model.meanCommute.whatif.toFixed(1)} min</b>` +
      ` (<span data-field="delta.mean_commute">${(model.meanCommute.delta ?? 0).toFixed(2)} min</span>)</p>`
    : `<p>Mean commute: <b data-field="baseline.mean_commute">${model.meanCommute.baseline.toFixed(1)} min</b></p>`;
  const movers = `<p>Movers per iteration: ${sparkline(model.movers.baseline)}` +
    (model.movers.whatif ? ` ${sparkline(model.movers.whatif)}` : "") + `</p>`;
  return `<div class="compare"><table>${header}${rows.join("")}</table>${commute}${movers}</div>`;
}
