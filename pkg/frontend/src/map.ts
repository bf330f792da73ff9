// Choropleth rendering: features arrive in planar meters and are drawn
// directly into an SVG viewBox (no tile server); the map never recomputes a
// metric, it only colors features by fields the service already provided.

import { divergingScale, categoricalColor, sequentialScale, Legend } from "./scales.js";
import { Feature, LayersPayload, Metric, WhatifPayload } from "./types.js";

export interface MapView {
  svg: string;
  legend: Legend | null;
  message?: string;
}

const WIDTH = 840;

function bounds(features: Feature[]): [number, number, number, number] {
  let minX = Infinity, minY = Infinity, maxX = -Infinity, maxY = -Infinity;
  for (const f of features) {
    for (const ring of f.geometry.coordinates) {
      for (const [x, y] of ring) {
        minX = Math.min(minX, x); maxX = Math.max(maxX, x);
        minY = Math.min(minY, y); maxY = Math.max(maxY, y);
      }
    }
  }
  return [minX, minY, maxX, maxY];
}

function pathFor(f: Feature, tx: (x: number) => number, ty: (y: number) => number): string {
  return f.geometry.coordinates
    .map((ring) =>
      ring.map(([x, y], i) => `${i === 0 ? "M" : "L"}${tx(x).toFixed(1)},${ty(y).toFixed(1)}`).join(" ") + " Z"
    )
    .join(" ");
}

export function metricValue(f: Feature, metric: Metric): number | null {
  const p = f.properties;
  switch (metric) {
    case "diversity":
      return typeof p.diversity === "number" ? p.diversity : null;
    case "vacancy":
      return typeof p.vacancies === "number" ? p.vacancies : null;
    case "rent":
      return typeof p.rent === "number" ? p.rent : null;
    default:
      return null;
  }
}

export function renderMap(
  layers: LayersPayload,
  metric: Metric,
  deltas: WhatifPayload["deltas"] | null = null,
): MapView {
  const features = layers.features ?? [];
  if (!features.length) {
    return { svg: "", legend: null, message: "No geography loaded for this session." };
  }
  const [minX, minY, maxX, maxY] = bounds(features);
  const scale = WIDTH / (maxX - minX || 1);
  const height = (maxY - minY) * scale;
  const tx = (x: number) => (x - minX) * scale;
  const ty = (y: number) => height - (y - minY) * scale; // SVG y grows downward

  let colorFor: (f: Feature) => string;
  let legend: Legend | null = null;

  if (deltas) {
    // Delta view: diverging scale over the service-computed per-unit deltas.
    const table = deltas.unit_diversity;
    const { color, legend: lg } = divergingScale(Object.values(table), "diversity delta");
    legend = lg;
    colorFor = (f) => (f.id in table ? color(table[f.id]) : "#eeeeee");
  } else if (metric === "dominant_profile") {
    const categories = [...new Set(
      features.map((f) => f.properties.dominant_profile).filter((v): v is string => !!v)
    )].sort();
    colorFor = (f) => categoricalColor(categories, f.properties.dominant_profile ?? null);
    legend = {
      kind: "categorical", min: 0, max: categories.length, label: "dominant profile",
      stops: categories.map((c, i) => ({ value: i, color: categoricalColor(categories, c) })),
    };
  } else {
    const values = features
      .map((f) => metricValue(f, metric))
      .filter((v): v is number => v !== null);
    const { color, legend: lg } = sequentialScale(values, metric);
    legend = lg;
    colorFor = (f) => {
      const v = metricValue(f, metric);
      return v === null ? "#eeeeee" : color(v);
    };
  }

  const blockGroups = features.filter((f) => f.properties.kind === "block_group");
  const buildings = features.filter((f) => f.properties.kind === "building");
  const polys: string[] = [];
  for (const f of blockGroups) {
    polys.push(
      `<path class="unit" data-kind="block_group" data-id="${f.id}" d="${pathFor(f, tx, ty)}" ` +
      `fill="${colorFor(f)}" stroke="#555" stroke-width="1"><title>${f.id}</title></path>`
    );
  }
  for (const f of buildings) {
    polys.push(
      `<path class="unit" data-kind="building" data-id="${f.id}" d="${pathFor(f, tx, ty)}" ` +
      `fill="${colorFor(f)}" stroke="#222" stroke-width="0.6"><title>${f.id}</title></path>`
    );
  }
  const svg =
    `<svg viewBox="0 0 ${WIDTH} ${height.toFixed(1)}" xmlns="http://www.w3.org/2000/svg">` +
    polys.join("") + `</svg>`;
  return { svg, legend };
}

export function renderLegend(legend: Legend | null): string {
  if (!legend) return "";
  const items = legend.stops
    .map((s) => `<span class="legend-item"><span class="swatch" style="background:${s.color}"></span>` +
                `${Number.isFinite(s.value) ? s.value.toFixed(2) : s.value}</span>`)
    .join("");
  return `<div class="legend" data-kind="${legend.kind}"><strong>${legend.label}</strong>${items}</div>`;
}
