/** Pure HTML renderers for the session page; main.ts wires the events. */

import type { CompareResult, HistoryEntry, SceneData, StrategyCard } from "./api.js";
import type { SessionViewModel } from "./model.js";
import { altText, buildOverlaySvg } from "./overlay.js";

function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderViewPane(
  name: "A" | "B",
  renderUrl: string,
  scene: SceneData,
  highlight: Set<number>,
): string {
  return (
    `<figure class="view-pane" data-view="${name}">` +
    `<div class="stack">` +
    `<img src="${esc(renderUrl)}" alt="${esc(altText(scene))}"/>` +
    buildOverlaySvg(scene, highlight) +
    `</div>` +
    `<figcaption>View ${name}</figcaption>` +
    `</figure>`
  );
}

export function renderLabelList(vm: SessionViewModel): string {
  const rows = vm.labels
    .map((l) => {
      const on = vm.highlight.has(l.label) ? " selected" : "";
      return (
        `<li class="label-row${on}">` +
        `<span class="chip">${l.label}</span> normal ${esc(l.normal)}, ` +
        `area ${l.area}</li>`
      );
    })
    .join("");
  return `<ul class="label-list" aria-label="face labels">${rows}</ul>`;
}

export function renderHistory(history: HistoryEntry[]): string {
  if (history.length === 0) {
    return `<p class="empty">No assignments yet.</p>`;
  }
  const items = history
    .map((h, i) => {
      const extra =
        h.feedback !== null
          ? ` after feedback &quot;${esc(h.feedback)}&quot;`
          : h.seed !== null
            ? ` (seed ${h.seed})`
            : h.parts
              ? ` (parts: ${esc(h.parts.join(", "))})`
              : "";
      return (
        `<li><span class="origin">${esc(h.origin)}</span>` +
        ` labels [${h.labels.join(", ")}]${extra}` +
        ` <time datetime="${esc(h.timestamp)}">${esc(h.timestamp)}</time></li>`
      );
    })
    .join("");
  return `<ol class="history" aria-label="assignment history">${items}</ol>`;
}

function card(name: string, title: string, body: StrategyCard, canAdopt: boolean, seed: number): string {
  if (body.error) {
    return (
      `<div class="card error" data-strategy="${name}">` +
      `<h3>${esc(title)}</h3><p class="card-error">${esc(body.error)}</p></div>`
    );
  }
  const labels = body.labels ?? [];
  const parts = body.parts ? `<p>parts: ${esc(body.parts.join(", "))}</p>` : "";
  const adopt = canAdopt
    ? `<button type="button" class="adopt" data-strategy="${name}" data-seed="${seed}">Adopt</button>`
    : "";
  return (
    `<div class="card" data-strategy="${name}" data-labels="${labels.join(",")}">` +
    `<h3>${esc(title)}</h3><p>labels [${labels.join(", ")}]</p>${parts}${adopt}</div>`
  );
}

export function renderCompareCards(result: CompareResult, canAdopt: boolean): string {
  return (
    `<div class="compare-cards">` +
    card("rule", "Rule-based", result.rule, canAdopt, result.seed) +
    card("random", "Random", result.random, canAdopt, result.seed) +
    card("vlm", "VLM", result.vlm, canAdopt, result.seed) +
    `</div>`
  );
}

export function renderSessionPage(
  vm: SessionViewModel,
  panes: { A: string; B: string },
): string {
  const verdict = vm.planVerdict
    ? `<span class="verdict ${vm.planVerdict.toLowerCase()}">${esc(vm.planVerdict)}</span>`
    : "";
  const dl = vm.canDownload
    ? `<a id="download" href="/sessions/${esc(vm.id)}/program" download="program.json">Download program</a>`
    : `<a id="download" class="disabled" aria-disabled="true">Download program</a>`;
  return `
<header>
  <h1>${esc(vm.prompt)}</h1>
  <p class="meta">session ${esc(vm.id)} &middot; status <strong>${esc(vm.status)}</strong> ${verdict}</p>
</header>
<section class="views" aria-label="labeled renders">${panes.A}${panes.B}</section>
<section class="controls">
  <div class="strategies" role="group" aria-label="strategies">
    <button type="button" id="run-rule" ${vm.canSelect ? "" : "disabled"}>Rule-based</button>
    <button type="button" id="run-random" ${vm.canSelect ? "" : "disabled"}>Random</button>
    <button type="button" id="run-vlm" ${vm.canSelect ? "" : "disabled"}>VLM</button>
    <button type="button" id="compare" ${vm.canSelect ? "" : "disabled"}>Compare all three</button>
    <button type="button" id="plan" ${vm.canFeedback ? "" : "disabled"}>Plan &amp; simulate</button>
    ${dl}
  </div>
  <form id="feedback-form">
    <label for="feedback-text">Refine with feedback</label>
    <input id="feedback-text" type="text"
           placeholder="e.g. I want panels on the seat"
           ${vm.canFeedback ? "" : "disabled"} autocomplete="off"/>
    <button type="submit" id="feedback-send" disabled>Send</button>
  </form>
  <div id="toast" role="alert" aria-live="polite" hidden></div>
</section>
<section id="compare-area" aria-label="strategy comparison"></section>
<section class="side">
  <h2>Labels</h2>
  ${renderLabelList(vm)}
  <h2>History</h2>
  ${renderHistory(vm.history)}
</section>`;
}
