/** Hash-routed single-page steward console. */

import { renderEntityDetail } from "./views/entityDetail";
import { renderEntityList } from "./views/entityList";

export interface AppState {
  minSize: number;
}

export function route(root: HTMLElement, hash: string, state: AppState): void {
  const entityMatch = /^#\/entity\/(.+)$/.exec(hash);
  if (entityMatch) {
    void renderEntityDetail(root, decodeURIComponent(entityMatch[1]), {
      onBack: () => {
        window.location.hash = "#/";
      },
    });
    return;
  }
  void renderEntityList(root, {
    minSize: state.minSize,
    onOpen: (entityId) => {
      window.location.hash = `#/entity/${encodeURIComponent(entityId)}`;
    },
    onFilter: (minSize) => {
      state.minSize = minSize;
      route(root, window.location.hash, state);
    },
  });
}

export function startApp(root: HTMLElement): void {
  const state: AppState = { minSize: 1 };
  window.addEventListener("hashchange", () =>
    route(root, window.location.hash, state));
  route(root, window.location.hash, state);
}
