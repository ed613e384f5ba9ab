/** Display formatting only — never arithmetic on scores. */

export function formatProbability(p: number): string {
  return p.toFixed(3);
}

export function formatScore(s: number): string {
  const text = s.toFixed(2);
  return s > 0 ? `+${text}` : text;
}

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}
