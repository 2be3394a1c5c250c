// Side panel showing validation diagnostics, model metrics, and the
// structural diff against the previous model of the same language.

import type { Analysis } from "./types";

function section(title: string): HTMLElement {
  const wrapper = document.createElement("section");
  const heading = document.createElement("h3");
  heading.textContent = title;
  wrapper.appendChild(heading);
  return wrapper;
}

function diagnosticsSection(analysis: Analysis): HTMLElement {
  const wrapper = section("Diagnostics");
  const list = document.createElement("ul");
  list.className = "diagnostics-list";
  if (analysis.diagnostics.diagnostics.length === 0) {
    const item = document.createElement("li");
    item.textContent = "no diagnostics";
    list.appendChild(item);
  }
  for (const diagnostic of analysis.diagnostics.diagnostics) {
    const item = document.createElement("li");
    item.className = `diag-${diagnostic.severity}`;
    item.textContent =
      `${diagnostic.line}:${diagnostic.column} ${diagnostic.severity} ` +
      `[${diagnostic.code}] ${diagnostic.message}`;
    list.appendChild(item);
  }
  wrapper.appendChild(list);
  return wrapper;
}

function metricsSection(analysis: Analysis): HTMLElement {
  const wrapper = section("Metrics");
  const table = document.createElement("table");
  table.className = "metrics-table";
  for (const [key, value] of Object.entries(analysis.metrics ?? {})) {
    if (key === "language") continue;
    const row = table.insertRow();
    row.insertCell().textContent = key;
    row.insertCell().textContent = Array.isArray(value)
      ? value.join(", ")
      : JSON.stringify(value);
  }
  wrapper.appendChild(table);
  return wrapper;
}

function describe(item: unknown): string {
  if (Array.isArray(item)) return item.join(" ");
  return String(item);
}

function diffSection(analysis: Analysis): HTMLElement {
  const wrapper = section("Changes vs. previous model");
  if (!analysis.diff) {
    const note = document.createElement("p");
    note.className = "no-prior-model";
    note.textContent = "no prior model";
    wrapper.appendChild(note);
    return wrapper;
  }
  const list = document.createElement("ul");
  list.className = "diff-list";
  const categories = [
    "classes", "enums", "attributes", "operations", "relationships",
    "nodes", "edges",
  ] as const;
  let changes = 0;
  for (const category of categories) {
    const bucket = analysis.diff[category];
    for (const item of bucket.added) {
      const line = document.createElement("li");
      line.className = "diff-added";
      line.textContent = `+ ${category.slice(0, -1)} ${describe(item)}`;
      list.appendChild(line);
      changes += 1;
    }
    for (const item of bucket.removed) {
      const line = document.createElement("li");
      line.className = "diff-removed";
      line.textContent = `- ${category.slice(0, -1)} ${describe(item)}`;
      list.appendChild(line);
      changes += 1;
    }
    for (const item of bucket.modified) {
      const line = document.createElement("li");
      line.className = "diff-modified";
      line.textContent = `~ ${category.slice(0, -1)} ${describe(item)}`;
      list.appendChild(line);
      changes += 1;
    }
  }
  if (changes === 0) {
    const note = document.createElement("p");
    note.textContent = "no structural changes";
    wrapper.appendChild(note);
  } else {
    wrapper.appendChild(list);
  }
  return wrapper;
}

export function renderInspector(panel: HTMLElement, analysis: Analysis): void {
  panel.replaceChildren(
    diagnosticsSection(analysis),
    metricsSection(analysis),
    diffSection(analysis),
  );
  panel.hidden = false;
}
