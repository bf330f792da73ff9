// Payload shapes mirror the service's JSON responses; the UI never computes
// domain metrics, it only selects and formats fields from these documents.

export interface Summary {
  schema: string;
  seed: number;
  n_agents: number;
  iterations: number;
  converged: boolean;
  mode_shares: Record<string, number>;
  mean_commute_minutes: number;
  commute_minutes: { p10: number; p50: number; p90: number };
  block_group_profile_percent: Record<string, Record<string, number>>;
  units: UnitMetrics[];
  movers: number[];
}

export interface UnitMetrics {
  id: string;
  kind: "block_group" | "building";
  block_group: string;
  occupants: number;
  vacancies: number;
  rent: number;
  diversity: number;
  dominant_profile: string | null;
}

export interface FeatureProperties extends Partial<UnitMetrics> {
  id: string;
  kind: string;
  city?: string;
  usage?: string;
  has_T?: boolean;
  has_bus?: boolean;
  profile_percent?: Record<string, number>;
}

export interface Feature {
  type: "Feature";
  id: string;
  properties: FeatureProperties;
  geometry: { type: "Polygon"; coordinates: number[][][] };
}

export interface LayersPayload {
  type: "FeatureCollection";
  crs: string;
  features: Feature[];
}

export interface Intervention {
  kind: "set_rent" | "add_vacancies" | "remove_vacancies" | "set_transit_flag";
  target: string;
  value: number | boolean;
  flag?: "has_T" | "has_bus";
}

export interface WhatifPayload {
  name: string;
  interventions: Intervention[];
  summary: Summary;
  deltas: {
    mode_shares: Record<string, number>;
    mean_commute_minutes: number;
    block_group_profile_percent: Record<string, Record<string, number>>;
    unit_diversity: Record<string, number>;
  };
}

export type Metric = "diversity" | "dominant_profile" | "vacancy" | "rent" | "mode_share";
export type Comparison = "baseline" | { whatif: string } | { delta: string };

export interface ViewState {
  sessionId: string | null;
  metric: Metric;
  comparison: Comparison;
  draft: Intervention[];
  pending: boolean;
}
