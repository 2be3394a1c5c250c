// Model-derived SVG is untrusted input. It is sanitized here and then
// rendered inside a sandboxed iframe so nothing executes in the app origin.

const BLOCKED_ELEMENTS = new Set([
  "script", "foreignobject", "iframe", "object", "embed", "audio", "video",
]);

export function sanitizeSvg(markup: string): string {
  const parsed = new DOMParser().parseFromString(markup, "image/svg+xml");
  if (parsed.querySelector("parsererror")) return "";
  const root = parsed.documentElement;
  if (root.localName.toLowerCase() !== "svg") return "";

  const walk = (element: Element): void => {
    for (const child of Array.from(element.children)) {
      if (BLOCKED_ELEMENTS.has(child.localName.toLowerCase())) {
        child.remove();
        continue;
      }
      walk(child);
    }
    for (const attr of Array.from(element.attributes)) {
      const name = attr.name.toLowerCase();
      const value = attr.value.trim().toLowerCase();
      if (name.startsWith("on")) element.removeAttribute(attr.name);
      else if ((name === "href" || name === "xlink:href") && !value.startsWith("#")) {
        element.removeAttribute(attr.name);
      } else if (value.includes("javascript:")) {
        element.removeAttribute(attr.name);
      }
    }
  };
  walk(root);
  return new XMLSerializer().serializeToString(root);
}

export function embedSvg(markup: string): HTMLElement {
  const clean = sanitizeSvg(markup);
  const frame = document.createElement("iframe");
  frame.className = "artifact-svg";
  frame.setAttribute("sandbox", "");
  frame.setAttribute("title", "rendered model");
  frame.setAttribute(
    "srcdoc",
    `<!DOCTYPE html><html><body style="margin:0">${clean}</body></html>`,
  );
  return frame;
}
