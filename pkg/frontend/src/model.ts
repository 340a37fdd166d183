/** Session view-model: a thin mirror of the server state.
 *
 * The UI never computes geometry or selections itself; the highlight set
 * always equals the server's latest response, except for an optimistic
 * preview flagged as pending and reconciled on the next server state.
 */

import type { HistoryEntry, LabelInfo, PlanInfo, SessionState } from "./api.js";

export interface SessionViewModel {
  id: string;
  prompt: string;
  status: string;
  labels: LabelInfo[];
  highlight: Set<number>;
  pendingPreview: boolean;
  history: HistoryEntry[];
  plans: PlanInfo[];
  planVerdict: string | null;
  canSelect: boolean;
  canFeedback: boolean;
  canDownload: boolean;
}

const SELECTABLE = new Set(["DISCRETIZED", "ASSIGNED", "PLANNED"]);
const FEEDBACKABLE = new Set(["ASSIGNED", "PLANNED"]);

export function toViewModel(state: SessionState): SessionViewModel {
  const plans = state.plans ?? [];
  const latestPlan = plans.length > 0 ? plans[plans.length - 1] : undefined;
  return {
    id: state.id,
    prompt: state.prompt,
    status: state.status,
    labels: state.labels ?? [],
    highlight: new Set(state.current_labels ?? []),
    pendingPreview: false,
    history: state.history ?? [],
    plans,
    planVerdict: latestPlan ? latestPlan.verdict : null,
    canSelect: SELECTABLE.has(state.status),
    canFeedback: FEEDBACKABLE.has(state.status),
    canDownload: state.status === "PLANNED" && plans.length > 0,
  };
}

/** Server response wins over any local preview. */
export function applyServerState(
  _vm: SessionViewModel,
  state: SessionState,
): SessionViewModel {
  return toViewModel(state);
}

/** Optimistic highlight while a mutation is in flight. */
export function optimisticHighlight(
  vm: SessionViewModel,
  labels: number[],
): SessionViewModel {
  return { ...vm, highlight: new Set(labels), pendingPreview: true };
}

export function feedbackDisabled(text: string): boolean {
  return text.trim().length === 0;
}

export function sameLabels(a: Iterable<number>, b: Iterable<number>): boolean {
  const sa = [...a].sort((x, y) => x - y);
  const sb = [...b].sort((x, y) => x - y);
  return sa.length === sb.length && sa.every((v, i) => v === sb[i]);
}
