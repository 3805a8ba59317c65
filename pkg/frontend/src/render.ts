// String-building helpers. Views render to HTML strings so they stay pure
// and testable without a DOM; the app shell owns all live DOM access.

export function esc(value: unknown): string {
  return String(value)
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

// raw value display: no rounding, no reformatting; the gateway's numbers are
// shown exactly as received
export function cell(value: unknown): string {
  if (value === null || value === undefined) {
    return "";
  }
  return esc(value);
}

export function tag(
  name: string,
  attrs: Record<string, string | null>,
  inner = "",
): string {
  const parts = Object.entries(attrs)
    .filter(([, v]) => v !== null)
    .map(([k, v]) => ` ${k}="${esc(v)}"`)
    .join("");
  return `<${name}${parts}>${inner}</${name}>`;
}
