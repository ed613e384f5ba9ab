/**
 * Star layout of an entity: representative at the center, members on a
 * circle around it. Deterministic — members are placed in sorted order, so
 * the same entity always renders the same picture.
 */

import { EntityDetail } from "../api";

const SVG_NS = "http://www.w3.org/2000/svg";
const SIZE = 360;
const RADIUS = 140;
const NODE_R = 14;

export function renderStarGraph(
  detail: EntityDetail,
  onPickPair: (member: string) => void,
): SVGSVGElement {
  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("viewBox", `0 0 ${SIZE} ${SIZE}`);
  svg.setAttribute("class", "star-graph");
  const cx = SIZE / 2;
  const cy = SIZE / 2;

  const satellites = detail.members
    .map((m) => m.record_id)
    .filter((id) => id !== detail.representative)
    .sort();

  const positions = new Map<string, [number, number]>();
  positions.set(detail.representative, [cx, cy]);
  satellites.forEach((id, i) => {
    const angle = (2 * Math.PI * i) / satellites.length - Math.PI / 2;
    positions.set(id, [
      cx + RADIUS * Math.cos(angle),
      cy + RADIUS * Math.sin(angle),
    ]);
  });

  for (const edge of detail.edges) {
    const from = positions.get(edge.member);
    const to = positions.get(edge.representative);
    if (!from || !to) continue;
    const line = document.createElementNS(SVG_NS, "line");
    line.setAttribute("x1", String(from[0]));
    line.setAttribute("y1", String(from[1]));
    line.setAttribute("x2", String(to[0]));
    line.setAttribute("y2", String(to[1]));
    line.setAttribute("class", "star-edge");
    svg.append(line);
  }

  for (const [id, [x, y]] of positions) {
    const group = document.createElementNS(SVG_NS, "g");
    group.setAttribute("class",
      id === detail.representative ? "star-node representative" : "star-node");
    group.setAttribute("data-record-id", id);
    const circle = document.createElementNS(SVG_NS, "circle");
    circle.setAttribute("cx", String(x));
    circle.setAttribute("cy", String(y));
    circle.setAttribute("r", String(NODE_R));
    const text = document.createElementNS(SVG_NS, "text");
    text.setAttribute("x", String(x));
    text.setAttribute("y", String(y - NODE_R - 4));
    text.setAttribute("text-anchor", "middle");
    text.textContent = id;
    group.append(circle, text);
    if (id !== detail.representative) {
      group.addEventListener("click", () => onPickPair(id));
    }
    svg.append(group);
  }
  return svg;
}
