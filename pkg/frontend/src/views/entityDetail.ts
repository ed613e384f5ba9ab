/**
 * Entity detail: star graph of members around the representative, the
 * attribute comparison table, per-pair explanation, and the unlink flow.
 * All views are read-only except unlink.
 */

import {
  ApiError,
  EntityDetail,
  Explanation,
  explainPair,
  getEntity,
  unlinkPair,
} from "../api";
import { el, formatProbability, formatScore } from "../format";
import { renderExplanation } from "./explanation";
import { renderError } from "./entityList";
import { renderStarGraph } from "./starGraph";

export interface EntityDetailOptions {
  onBack: () => void;
}

function comparisonTable(detail: EntityDetail): HTMLElement {
  const attributes = new Set<string>();
  for (const member of detail.members) {
    for (const name of Object.keys(member.attributes)) attributes.add(name);
  }
  const table = el("table", "comparison-table");
  const head = el("tr");
  head.append(el("th", undefined, "attribute"));
  for (const member of detail.members) {
    const th = el("th", member.record_id === detail.representative
      ? "representative" : undefined, member.record_id);
    head.append(th);
  }
  table.append(head);
  for (const name of [...attributes].sort()) {
    const row = el("tr");
    row.dataset.attribute = name;
    row.append(el("td", "attr-name", name));
    for (const member of detail.members) {
      row.append(el("td", undefined, member.attributes[name] ?? "—"));
    }
    table.append(row);
  }
  return table;
}

function pairKey(a: string, b: string): [string, string] {
  return a < b ? [a, b] : [b, a];
}

export async function renderEntityDetail(
  root: HTMLElement,
  entityId: string,
  opts: EntityDetailOptions,
): Promise<void> {
  root.replaceChildren(el("p", "loading", "Loading entity…"));
  let detail: EntityDetail;
  try {
    detail = await getEntity(entityId);
  } catch (err) {
    renderError(root, err, () => renderEntityDetail(root, entityId, opts));
    return;
  }
  root.replaceChildren();

  const back = el("button", "back", "← All entities");
  back.addEventListener("click", opts.onBack);
  root.append(back);
  root.append(el("h2", undefined, detail.entity_id));
  root.append(el("p", "entity-meta",
    `${detail.members.length} members · representative ${detail.representative}`));

  root.append(renderStarGraph(detail, (member) => {
    void showPair(member, detail.representative);
  }));
  root.append(comparisonTable(detail));

  const scores = el("table", "pair-score-table");
  const head = el("tr");
  for (const title of ["pair", "engine total", "class", ""]) {
    head.append(el("th", undefined, title));
  }
  scores.append(head);
  for (const score of detail.pair_scores) {
    const row = el("tr", "pair-score-row");
    row.dataset.pair = `${score.a}|${score.b}`;
    const total = el("td", "score-total", formatScore(score.total));
    total.dataset.value = String(score.total);
    row.append(el("td", undefined, `${score.a} ↔ ${score.b}`), total,
               el("td", undefined, score.class ?? "—"));
    const actions = el("td", "pair-actions");
    const explainButton = el("button", "explain", "Explain");
    explainButton.addEventListener("click", () => void showPair(score.a, score.b));
    actions.append(explainButton);
    if (score.class === "Match") {
      const unlinkButton = el("button", "unlink", "Unlink…");
      unlinkButton.addEventListener("click", () =>
        void confirmUnlink(score.a, score.b));
      actions.append(unlinkButton);
    }
    row.append(actions);
    scores.append(row);
  }
  root.append(scores);

  const sidebar = el("div", "explanation-slot");
  root.append(sidebar);
  const noticeSlot = el("div", "notice-slot");
  root.append(noticeSlot);

  async function showPair(a: string, b: string): Promise<void> {
    const [u, v] = pairKey(a, b);
    sidebar.replaceChildren(el("p", "loading", `Explaining ${u} ↔ ${v}…`));
    let explanation: Explanation;
    try {
      explanation = await explainPair(u, v);
    } catch (err) {
      if (err instanceof ApiError && err.code === "model_not_trained") {
        const cta = el("div", "train-cta");
        cta.append(el("p", undefined,
          "The proxy model has not been trained yet, so there is nothing " +
          "to explain."));
        cta.append(el("code", undefined, "xem train-proxy --out <data-dir>"));
        sidebar.replaceChildren(cta);
        return;
      }
      renderError(sidebar, err, () => void showPair(a, b));
      return;
    }
    sidebar.replaceChildren(renderExplanation(explanation));
  }

  async function confirmUnlink(a: string, b: string): Promise<void> {
    const [u, v] = pairKey(a, b);
    const score = detail.pair_scores.find((s) => s.a === u && s.b === v);
    const dialog = el("div", "unlink-dialog");
    dialog.append(el("p", undefined, `Unlink ${u} from ${v}?`));
    if (score) {
      dialog.append(el("p", "dialog-score",
        `Engine total ${formatScore(score.total)}`));
    }
    try {
      const explanation = await explainPair(u, v);
      dialog.append(el("p", "dialog-proxy",
        `Proxy probability ${formatProbability(explanation.proxy_probability)}`));
    } catch {
      // no trained proxy — the engine total alone has to carry the dialog
    }
    const confirm = el("button", "confirm-unlink", "Unlink");
    const cancel = el("button", "cancel-unlink", "Cancel");
    cancel.addEventListener("click", () => dialog.remove());
    confirm.addEventListener("click", () => {
      confirm.disabled = true;
      void (async () => {
        try {
          const result = await unlinkPair(u, v, "steward-console");
          dialog.remove();
          await renderEntityDetail(root, entityId, opts);
          if (!result.separating) {
            // re-render rebuilt the slot; attach the notice to the new one
            root.querySelector(".notice-slot")?.replaceChildren(
              el("p", "non-separating-notice",
                 `${u} and ${v} remain connected via other matches.`));
          }
        } catch (err) {
          confirm.disabled = false;
          const message = err instanceof ApiError
            ? `${err.code}: ${err.message}` : String(err);
          dialog.append(el("p", "dialog-error", message));
        }
      })();
    });
    dialog.append(confirm, cancel);
    noticeSlot.replaceChildren(dialog);
  }
}
