// Dialogue pane: one bubble per entry, rendered artifacts inline beneath
// the response they belong to. Artifact bytes always come through the
// artifact URL endpoint, keeping dialogue payloads bounded.

import type { ApiClient } from "./api";
import { embedSvg } from "./svg";
import type { DialogueEntry } from "./types";

export function userBubble(text: string): HTMLElement {
  const bubble = document.createElement("div");
  bubble.className = "bubble user";
  bubble.textContent = text;
  return bubble;
}

export function llmBubble(
  entry: DialogueEntry,
  onInspect?: (entry: DialogueEntry) => void,
): HTMLElement {
  const bubble = document.createElement("div");
  bubble.className = "bubble llm";
  const text = document.createElement("div");
  text.className = "response-text";
  text.textContent = entry.text;
  bubble.appendChild(text);
  if (entry.detected_blocks.length > 0 && onInspect) {
    const inspect = document.createElement("button");
    inspect.className = "inspect";
    inspect.type = "button";
    inspect.textContent = "inspect model";
    inspect.addEventListener("click", () => onInspect(entry));
    bubble.appendChild(inspect);
  }
  return bubble;
}

export function diagnosticsPanel(text: string): HTMLElement {
  const panel = document.createElement("div");
  panel.className = "bubble interpreter diagnostics";
  const pre = document.createElement("pre");
  pre.textContent = text;
  panel.appendChild(pre);
  return panel;
}

async function artifactBody(
  client: ApiClient,
  hash: string,
  format: string,
): Promise<HTMLElement> {
  if (format === "png") {
    const image = document.createElement("img");
    image.className = "artifact-png";
    image.src = client.artifactUrl(hash);
    image.alt = "rendered model";
    return image;
  }
  const content = await client.fetchArtifactText(hash);
  if (format === "svg") return embedSvg(content);
  const pre = document.createElement("pre");
  pre.className = "artifact-text";
  pre.textContent = content;
  return pre;
}

export async function artifactPanel(
  client: ApiClient,
  entry: DialogueEntry,
  format: string,
): Promise<HTMLElement> {
  const panel = document.createElement("div");
  panel.className = "bubble interpreter artifact-panel";
  for (const hash of entry.artifacts) {
    panel.appendChild(await artifactBody(client, hash, format));
    const download = document.createElement("a");
    download.className = "artifact-download";
    download.href = client.artifactUrl(hash);
    download.setAttribute("download", `model-${hash.slice(0, 12)}.${format}`);
    download.textContent = "download";
    panel.appendChild(download);
  }
  return panel;
}
