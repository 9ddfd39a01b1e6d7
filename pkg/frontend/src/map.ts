/** Schematic SVG scatter of the spot roster: no tile dependency. */

import type { Marker } from "./viewmodel.js";

const NS = "http://www.w3.org/2000/svg";

export function renderMap(svg: SVGSVGElement, markers: Marker[],
                          highlight: Set<number> = new Set()): void {
  while (svg.firstChild) {
    svg.removeChild(svg.firstChild);
  }
  const width = svg.viewBox.baseVal.width || 640;
  const height = svg.viewBox.baseVal.height || 420;
  const pad = 24;
  for (const marker of markers) {
    const circle = document.createElementNS(NS, "circle");
    circle.setAttribute("cx", String(pad + marker.x * (width - 2 * pad)));
    circle.setAttribute("cy", String(pad + marker.y * (height - 2 * pad)));
    circle.setAttribute("r", String(marker.radius));
    const tone = Math.round(210 - 170 * marker.shade);
    circle.setAttribute("fill", `rgb(${tone - 60}, ${tone - 30}, ${tone})`);
    circle.setAttribute("data-spot", String(marker.id));
    if (highlight.has(marker.id)) {
      circle.setAttribute("stroke", "#d35400");
      circle.setAttribute("stroke-width", "2.5");
    }
    const title = document.createElementNS(NS, "title");
    title.textContent = marker.label;
    circle.appendChild(title);
    svg.appendChild(circle);
  }
}
