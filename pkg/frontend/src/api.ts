// Thin fetch client for the simulation service; errors carry the service's
// diagnostic detail so the UI can surface every failure message.

import { Intervention, LayersPayload, Summary, WhatifPayload } from "./types.js";

export class ServiceError extends Error {
  status: number;
  details: string[];

  constructor(status: number, details: string[]) {
    super(details.join("; ") || `service error ${status}`);
    this.status = status;
    this.details = details;
  }
}

async function request<T>(path: string, init?: RequestInit): Promise<T> {
  const response = await fetch(path, {
    headers: { "Content-Type": "application/json" },
    ...init,
  });
  if (!response.ok) {
    let details: string[] = [];
    try {
      const body = await response.json();
      details = Array.isArray(body.detail) ? body.detail.map(String) : [String(body.detail)];
    } catch {
      details = [response.statusText];
    }
    throw new ServiceError(response.status, details);
  }
  return response.json() as Promise<T>;
}

export function createSession(scenarioPath: string): Promise<{ session_id: string; summary: Summary }> {
  return request("/sessions", {
    method: "POST",
    body: JSON.stringify({ scenario_path: scenarioPath }),
  });
}

export function getSummary(sessionId: string): Promise<Summary> {
  return request(`/sessions/${sessionId}/summary`);
}

export function getLayers(sessionId: string, whatif?: string): Promise<LayersPayload> {
  const query = whatif ? `?whatif=${encodeURIComponent(whatif)}` : "";
  return request(`/sessions/${sessionId}/layers${query}`);
}

export function postWhatif(
  sessionId: string, name: string, interventions: Intervention[],
): Promise<WhatifPayload> {
  return request(`/sessions/${sessionId}/whatifs`, {
    method: "POST",
    body: JSON.stringify({ name, interventions }),
  });
}

export function getWhatif(sessionId: string, name: string): Promise<WhatifPayload> {
  return request(`/sessions/${sessionId}/whatifs/${encodeURIComponent(name)}`);
}
