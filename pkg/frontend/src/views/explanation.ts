/**
 * Pair explanation panel: one signed horizontal bar per attribute from the
 * engine-side attribution, plus the proxy-side mask rollup and fidelity.
 * Bars are sorted by |contribution| and capped to the top 10, with an
 * expander for the rest. Every number shown carries its exact API value in
 * a data attribute; the visible text is formatting only.
 */

import { Explanation } from "../api";
import { el, formatProbability, formatScore } from "../format";

const TOP_BARS = 10;

interface Bar {
  attribute: string;
  value: number;
}

function sortedBars(contributions: Record<string, number>): Bar[] {
  return Object.entries(contributions)
    .map(([attribute, value]) => ({ attribute, value }))
    .sort((x, y) => Math.abs(y.value) - Math.abs(x.value)
                    || x.attribute.localeCompare(y.attribute));
}

function renderBar(bar: Bar, maxAbs: number): HTMLElement {
  const row = el("div", "bar-row");
  row.dataset.attribute = bar.attribute;
  row.dataset.value = String(bar.value);
  row.append(el("span", "bar-label", bar.attribute));
  const track = el("div", "bar-track");
  const fill = el("div",
    bar.value >= 0 ? "bar-fill positive" : "bar-fill negative");
  const width = maxAbs === 0 ? 0 : (Math.abs(bar.value) / maxAbs) * 100;
  fill.style.width = `${width}%`;
  track.append(fill);
  row.append(track, el("span", "bar-value", formatScore(bar.value)));
  return row;
}

export function renderExplanation(explanation: Explanation): HTMLElement {
  const panel = el("section", "explanation");
  panel.append(el("h3", undefined,
    `Why ${explanation.a} ↔ ${explanation.b}?`));

  const proxy = el("p", "proxy-line");
  const probability = el("span", "proxy-probability",
    formatProbability(explanation.proxy_probability));
  probability.dataset.value = String(explanation.proxy_probability);
  const fidelity = el("span", "mask-fidelity",
    formatProbability(explanation.fidelity));
  fidelity.dataset.value = String(explanation.fidelity);
  proxy.append("Proxy match probability ", probability,
               " · mask fidelity ", fidelity);
  panel.append(proxy);

  const bars = sortedBars(explanation.attribution.contributions);
  const maxAbs = bars.length ? Math.abs(bars[0].value) : 0;
  const chart = el("div", "bar-chart");
  for (const bar of bars.slice(0, TOP_BARS)) {
    chart.append(renderBar(bar, maxAbs));
  }
  panel.append(chart);

  const rest = bars.slice(TOP_BARS);
  if (rest.length > 0) {
    const expander = el("details", "bar-others");
    expander.append(el("summary", undefined,
      `${rest.length} more attribute${rest.length === 1 ? "" : "s"}`));
    for (const bar of rest) {
      expander.append(renderBar(bar, maxAbs));
    }
    panel.append(expander);
  }

  const rollup = el("ul", "mask-rollup");
  for (const entry of explanation.top_attributes) {
    const item = el("li", undefined,
      `${entry.attribute}: ${formatProbability(entry.score)}`);
    item.dataset.attribute = entry.attribute;
    item.dataset.value = String(entry.score);
    rollup.append(item);
  }
  const rollupBlock = el("div", "mask-block");
  rollupBlock.append(el("h4", undefined, "Proxy mask — most relied-on attributes"),
                     rollup);
  panel.append(rollupBlock);
  return panel;
}
