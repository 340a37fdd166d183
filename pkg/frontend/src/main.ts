/** Bootstraps the session page and wires the conversational loop.
 *
 * One mutation in flight per session: while a request is pending every
 * mutating control is disabled, matching the server's per-session lock.
 */

import { ApiClient, ApiError, type SceneData, type SessionState } from "./api.js";
import {
  applyServerState,
  feedbackDisabled,
  optimisticHighlight,
  toViewModel,
  type SessionViewModel,
} from "./model.js";
import { renderCompareCards, renderSessionPage, renderViewPane } from "./view.js";

const api = new ApiClient("");

interface PageState {
  vm: SessionViewModel;
  scenes: { A: SceneData; B: SceneData };
  busy: boolean;
}

let page: PageState | null = null;

function app(): HTMLElement {
  const el = document.getElementById("app");
  if (!el) throw new Error("missing #app container");
  return el;
}

function toast(message: string): void {
  const el = document.getElementById("toast");
  if (!el) return;
  el.textContent = message;
  el.hidden = false;
  setTimeout(() => {
    el.hidden = true;
  }, 6000);
}

function redraw(): void {
  if (!page) return;
  const { vm, scenes } = page;
  const panes = {
    A: renderViewPane("A", api.renderUrl(vm.id, "A"), scenes.A, vm.highlight),
    B: renderViewPane("B", api.renderUrl(vm.id, "B"), scenes.B, vm.highlight),
  };
  app().innerHTML = renderSessionPage(vm, panes);
  wireEvents();
}

function setBusy(busy: boolean): void {
  if (!page) return;
  page.busy = busy;
  for (const btn of app().querySelectorAll("button")) {
    if (busy) btn.setAttribute("disabled", "");
  }
  if (!busy) redraw();
}

async function mutate(action: () => Promise<SessionState>): Promise<void> {
  if (!page || page.busy) return;
  setBusy(true);
  try {
    const state = await action();
    page.vm = applyServerState(page.vm, state);
  } catch (err) {
    toast(err instanceof ApiError ? `${err.code}: ${err.message}` : String(err));
  } finally {
    setBusy(false);
  }
}

function wireEvents(): void {
  if (!page) return;
  const vm = page.vm;

  document.getElementById("run-rule")?.addEventListener("click", () => {
    void mutate(() => api.select(vm.id, "RULE"));
  });
  document.getElementById("run-random")?.addEventListener("click", () => {
    void mutate(() => api.select(vm.id, "RANDOM"));
  });
  document.getElementById("run-vlm")?.addEventListener("click", () => {
    void mutate(() => api.select(vm.id, "VLM"));
  });
  document.getElementById("plan")?.addEventListener("click", () => {
    void mutate(() => api.plan(vm.id));
  });

  const input = document.getElementById("feedback-text") as HTMLInputElement | null;
  const send = document.getElementById("feedback-send") as HTMLButtonElement | null;
  if (input && send) {
    input.addEventListener("input", () => {
      send.disabled = feedbackDisabled(input.value) || !vm.canFeedback;
    });
    document.getElementById("feedback-form")?.addEventListener("submit", (ev) => {
      ev.preventDefault();
      const text = input.value;
      if (feedbackDisabled(text)) return;
      // optimistic: keep current highlight, flag pending; server reconciles
      page!.vm = optimisticHighlight(vm, [...vm.highlight]);
      void mutate(() => api.feedback(vm.id, text));
    });
  }

  document.getElementById("compare")?.addEventListener("click", () => {
    void runCompare();
  });

  const compareArea = document.getElementById("compare-area");
  compareArea?.addEventListener("click", (ev) => {
    const target = ev.target as HTMLElement;
    if (!target.classList.contains("adopt")) return;
    const strategy = target.dataset.strategy ?? "";
    const seed = Number(target.dataset.seed ?? "0");
    void mutate(() =>
      api.select(vm.id, strategy.toUpperCase(), strategy === "random" ? seed : undefined),
    );
  });
}

async function runCompare(): Promise<void> {
  if (!page || page.busy) return;
  const area = document.getElementById("compare-area");
  if (!area) return;
  try {
    const result = await api.compare(page.vm.id);
    area.innerHTML = renderCompareCards(result, page.vm.canSelect);
  } catch (err) {
    toast(err instanceof ApiError ? `${err.code}: ${err.message}` : String(err));
  }
}

async function boot(): Promise<void> {
  const params = new URLSearchParams(window.location.search);
  const id = params.get("session");
  if (!id) {
    app().innerHTML = `<p class="empty">Add ?session=&lt;id&gt; to the URL.</p>`;
    return;
  }
  try {
    const state = await api.getSession(id);
    const vm = toViewModel(state);
    if (state.status === "CREATED") {
      app().innerHTML = `<p class="empty">Session ${id} is not discretized yet.</p>`;
      return;
    }
    const [a, b] = await Promise.all([api.getScene(id, "A"), api.getScene(id, "B")]);
    page = { vm, scenes: { A: a, B: b }, busy: false };
    redraw();
  } catch (err) {
    app().innerHTML = `<p class="empty">Session not found: ${String(
      err instanceof ApiError ? err.message : err,
    )}</p>`;
  }
}

void boot();
