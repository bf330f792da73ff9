// Color scales for the choropleth: a sequential ramp for plain metrics and a
// diverging ramp centered at zero for delta views.

export interface Legend {
  kind: "sequential" | "diverging" | "categorical";
  min: number;
  max: number;
  stops: { value: number; color: string }[];
  label: string;
}

function lerp(a: number, b: number, t: number): number {
  return a + (b - a) * t;
}

function hex(r: number, g: number, b: number): string {
  const c = (x: number) => Math.round(Math.max(0, Math.min(255, x))).toString(16).padStart(2, "0");
  return `#${c(r)}${c(g)}${c(b)}`;
}

// Light parchment to deep teal.
export function sequentialColor(t: number): string {
  const clamped = Math.max(0, Math.min(1, t));
  return hex(lerp(245, 29, clamped), lerp(242, 110, clamped), lerp(230, 114, clamped));
}

// Blue (negative) through white (zero) to red (positive).
export function divergingColor(t: number): string {
  const clamped = Math.max(-1, Math.min(1, t));
  if (clamped < 0) {
    return hex(lerp(255, 49, -clamped), lerp(255, 108, -clamped), lerp(255, 181, -clamped));
  }
  return hex(lerp(255, 202, clamped), lerp(255, 63, clamped), lerp(255, 41, clamped));
}

export function sequentialScale(values: number[], label: string): {
  color: (v: number) => string; legend: Legend;
} {
  const finite = values.filter((v) => Number.isFinite(v));
  const min = finite.length ? Math.min(...finite) : 0;
  const max = finite.length ? Math.max(...finite) : 1;
  const span = max - min;
  const color = (v: number) => (span > 0 ? sequentialColor((v - min) / span) : sequentialColor(0.5));
  const stops = [0, 0.25, 0.5, 0.75, 1].map((t) => ({
    value: min + t * span,
    color: sequentialColor(span > 0 ? t : 0.5),
  }));
  return { color, legend: { kind: "sequential", min, max, stops, label } };
}

export function divergingScale(values: number[], label: string): {
  color: (v: number) => string; legend: Legend;
} {
  const finite = values.filter((v) => Number.isFinite(v));
  const amplitude = finite.length ? Math.max(...finite.map(Math.abs)) : 0;
  const color = (v: number) => (amplitude > 0 ? divergingColor(v / amplitude) : divergingColor(0));
  const stops = [-1, -0.5, 0, 0.5, 1].map((t) => ({
    value: t * amplitude,
    color: divergingColor(t),
  }));
  return {
    color,
    legend: { kind: "diverging", min: -amplitude, max: amplitude, stops, label },
  };
}

// Stable palette for categorical values (dominant profile).
const CATEGORY_COLORS = [
  "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f",
  "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac",
];

export function categoricalColor(categories: string[], value: string | null): string {
  if (value === null) return "#dddddd";
  const idx = categories.indexOf(value);
  return CATEGORY_COLORS[(idx >= 0 ? idx : categories.length) % CATEGORY_COLORS.length];
}
