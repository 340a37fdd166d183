/** SVG highlight overlays built from the server's projected patch polygons.
 *
 * The overlay re-colors patch polygons fetched as structured data; it is
 * crisp at any zoom and needs no client-side image processing.
 */

import type { SceneData } from "./api.js";

const HIGHLIGHT_FILL = "rgba(255, 140, 66, 0.55)";
const HIGHLIGHT_STROKE = "#c85a10";

function polygonPoints(points: number[][]): string {
  return points.map((p) => `${(p[0] ?? 0).toFixed(2)},${(p[1] ?? 0).toFixed(2)}`).join(" ");
}

/** Translucent polygons covering every quad of each highlighted patch. */
export function buildOverlaySvg(scene: SceneData, highlight: Set<number>): string {
  const w = scene.canvas[0] ?? 0;
  const h = scene.canvas[1] ?? 0;
  const polys = scene.polygons
    .filter((p) => p.label !== null && highlight.has(p.label))
    .map(
      (p) =>
        `<polygon points="${polygonPoints(p.points)}" fill="${HIGHLIGHT_FILL}" ` +
        `stroke="${HIGHLIGHT_STROKE}" stroke-width="2" data-label="${p.label}"/>`,
    );
  return (
    `<svg class="overlay" viewBox="0 0 ${w} ${h}" ` +
    `xmlns="http://www.w3.org/2000/svg" aria-hidden="true">` +
    polys.join("") +
    `</svg>`
  );
}

/** Labels visible in a view, for accessible alt text. */
export function visibleLabels(scene: SceneData): number[] {
  return [...new Set(scene.labels.map((l) => l.label))].sort((a, b) => a - b);
}

export function altText(scene: SceneData): string {
  const labels = visibleLabels(scene);
  if (labels.length === 0) {
    return `Axonometric view ${scene.view} (no labels visible)`;
  }
  return `Axonometric view ${scene.view} showing labels ${labels.join(", ")}`;
}
