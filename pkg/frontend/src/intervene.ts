// Intervention drafting: build the exact payload the service expects and
// mirror its 409/422 validation rules client-side so a doomed submission is
// disabled before it is sent.

import { Feature, Intervention } from "./types.js";

export interface DraftProblem {
  index: number;
  message: string;
}

export function validateDraft(drafts: Intervention[], features: Feature[]): DraftProblem[] {
  const byId = new Map(features.map((f) => [f.id, f]));
  const problems: DraftProblem[] = [];
  drafts.forEach((draft, index) => {
    const feature = draft.target === "*" ? null : byId.get(draft.target);
    if (draft.target !== "*" && !feature) {
      problems.push({ index, message: `unknown target ${draft.target}` });
      return;
    }
    switch (draft.kind) {
      case "set_rent":
        if (typeof draft.value !== "number" || draft.value <= 0) {
          problems.push({ index, message: "rent must be a positive number" });
        }
        if (draft.target === "*") {
          problems.push({ index, message: "set_rent needs a single target unit" });
        }
        break;
      case "add_vacancies":
        if (typeof draft.value !== "number" || draft.value < 0 || !Number.isInteger(draft.value)) {
          problems.push({ index, message: "vacancies to add must be a whole number >= 0" });
        }
        break;
      case "remove_vacancies": {
        const available = feature?.properties.vacancies;
        if (typeof draft.value !== "number" || draft.value < 0 || !Number.isInteger(draft.value)) {
          problems.push({ index, message: "vacancies to remove must be a whole number >= 0" });
        } else if (typeof available === "number" && draft.value > available) {
          problems.push({
            index,
            message: `only ${available} unoccupied dwellings at ${draft.target}; removing ` +
                     `${draft.value} would evict residents`,
          });
        }
        break;
      }
      case "set_transit_flag":
        if (draft.flag !== "has_T" && draft.flag !== "has_bus") {
          problems.push({ index, message: "flag must be has_T or has_bus" });
        }
        if (typeof draft.value !== "boolean") {
          problems.push({ index, message: "transit flag value must be true or false" });
        }
        if (feature && feature.properties.kind !== "block_group") {
          problems.push({ index, message: "transit flags apply to block groups" });
        }
        break;
    }
  });
  return problems;
}

export function buildPayload(name: string, drafts: Intervention[]): {
  name: string;
  interventions: Intervention[];
} {
  // Entry order is preserved: interventions apply sequentially on the server.
  return { name, interventions: drafts.map((d) => ({ ...d })) };
}

export function describeIntervention(iv: Intervention): string {
  switch (iv.kind) {
    case "set_rent":
      return `set rent of ${iv.target} to ${iv.value}`;
    case "add_vacancies":
      return `add ${iv.value} vacancies at ${iv.target}`;
    case "remove_vacancies":
      return `remove ${iv.value} vacancies at ${iv.target}`;
    case "set_transit_flag":
      return `set ${iv.flag} = ${iv.value} on ${iv.target === "*" ? "all block groups" : iv.target}`;
  }
}
