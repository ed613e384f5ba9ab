/** Entity browser: largest entities first, with a minimum-size filter. */

import { ApiError, EntityListPage, listEntities } from "../api";
import { el } from "../format";

const PAGE_SIZE = 50;

export interface EntityListOptions {
  minSize: number;
  pageToken?: number;
  onOpen: (entityId: string) => void;
  onFilter: (minSize: number) => void;
}

export async function renderEntityList(
  root: HTMLElement,
  opts: EntityListOptions,
): Promise<void> {
  root.replaceChildren(el("p", "loading", "Loading entities…"));
  let page: EntityListPage;
  try {
    page = await listEntities({
      minSize: opts.minSize,
      limit: PAGE_SIZE,
      pageToken: opts.pageToken,
    });
  } catch (err) {
    renderError(root, err, () => renderEntityList(root, opts));
    return;
  }
  root.replaceChildren();

  const bar = el("div", "filter-bar");
  const label = el("label", undefined, "Min size ");
  const input = el("input");
  input.type = "number";
  input.min = "1";
  input.value = String(opts.minSize);
  input.addEventListener("change", () => {
    opts.onFilter(Math.max(1, Number(input.value) || 1));
  });
  label.append(input);
  bar.append(label, el("span", "total", `${page.total} entities`));
  root.append(bar);

  if (page.items.length === 0) {
    root.append(el("p", "empty-state", "No entities match the current filter."));
    return;
  }

  const table = el("table", "entity-table");
  const head = el("tr");
  for (const title of ["Entity", "Size", "Representative"]) {
    head.append(el("th", undefined, title));
  }
  table.append(head);
  for (const item of page.items) {
    const row = el("tr", "entity-row");
    row.dataset.entityId = item.entity_id;
    const link = el("a", undefined, item.entity_id);
    link.href = `#/entity/${encodeURIComponent(item.entity_id)}`;
    const cell = el("td");
    cell.append(link);
    row.append(cell, el("td", "size", String(item.size)),
               el("td", undefined, item.representative));
    row.addEventListener("click", () => opts.onOpen(item.entity_id));
    table.append(row);
  }
  root.append(table);

  if (page.next_page_token !== null) {
    const more = el("button", "next-page", "Next page");
    more.addEventListener("click", () => {
      renderEntityList(root, { ...opts, pageToken: page.next_page_token! });
    });
    root.append(more);
  }
}

export function renderError(
  root: HTMLElement,
  err: unknown,
  retry: () => void,
): void {
  const message =
    err instanceof ApiError ? `${err.code}: ${err.message}` : String(err);
  const banner = el("div", "error-banner");
  banner.append(el("span", undefined, message));
  const button = el("button", "retry", "Retry");
  button.addEventListener("click", retry);
  banner.append(button);
  root.replaceChildren(banner);
}
