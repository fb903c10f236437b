/** Small DOM builders shared by the panels. Text lands in text nodes only,
 * never in markup strings. */

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: (Node | string)[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  node.append(...children);
  return node;
}

export function clear(node: Element): void {
  node.replaceChildren();
}

export function validationChip(validation: string): HTMLSpanElement {
  return el("span", { class: `chip chip-${validation}` }, validation);
}

export function errorBanner(message: string, onRetry: () => void): HTMLDivElement {
  const button = el("button", { class: "retry", type: "button" }, "retry");
  button.addEventListener("click", onRetry);
  return el(
    "div",
    { class: "error-banner", role: "alert" },
    el("span", { class: "error-message" }, message),
    button,
  );
}

export function messageOf(err: unknown): string {
  return err instanceof Error ? err.message : String(err);
}
