import { vi } from "vitest";

export type Handler = (init?: RequestInit) => { status?: number; body: unknown };

/**
 * Install a fetch stub routed by "METHOD path" keys, e.g. "GET /entities".
 * Query strings are stripped for lookup but recorded for assertions.
 */
export function mockApi(routes: Record<string, Handler>) {
  const calls: { method: string; url: string; body: unknown }[] = [];
  const fetchMock = vi.fn(async (url: string, init?: RequestInit) => {
    const method = init?.method ?? "GET";
    const path = url.split("?")[0];
    calls.push({
      method,
      url,
      body: init?.body ? JSON.parse(init.body as string) : undefined,
    });
    const handler = routes[`${method} ${path}`];
    if (!handler) {
      return new Response(
        JSON.stringify({ error: { code: "not_found", message: path } }),
        { status: 404 },
      );
    }
    const { status = 200, body } = handler(init);
    return new Response(JSON.stringify(body), { status });
  });
  vi.stubGlobal("fetch", fetchMock);
  return { calls, fetchMock };
}

/** Let queued promise callbacks and re-renders run to completion. */
export async function flush(): Promise<void> {
  for (let i = 0; i < 10; i++) {
    await new Promise((resolve) => setTimeout(resolve, 0));
  }
}

export function mount(): HTMLElement {
  const root = document.createElement("main");
  document.body.replaceChildren(root);
  return root;
}
