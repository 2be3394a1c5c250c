// Session controller: wires the settings sidebar, dialogue pane, progress
// indicator, and inspector panel to the service API. One in-flight prompt
// at a time; the pending flag gates the prompt box.

import { ApiClient, ApiError } from "./api";
import { artifactPanel, diagnosticsPanel, llmBubble, userBubble } from "./dialogue";
import { renderInspector } from "./inspector";
import {
  DEFAULT_SETTINGS,
  SettingsValues,
  toInterpreterConfig,
  toLlmConfig,
  validateSettings,
} from "./settings";
import type { Conversation, DialogueEntry, StageName } from "./types";

interface UiSessionState {
  conversationId: string | null;
  pending: boolean;
  settings: SettingsValues;
}

const NUMERIC_FIELDS = new Set([
  "temperature", "top_p", "top_k", "max_response_tokens",
]);

const SETTINGS_FIELDS: Array<{ name: keyof SettingsValues; label: string; kind: string }> = [
  { name: "backend", label: "Backend", kind: "select:replay,remote_chat_api,remote_replicate_style,local_process" },
  { name: "model", label: "Model", kind: "text" },
  { name: "temperature", label: "Temperature", kind: "number" },
  { name: "top_p", label: "top_p", kind: "number" },
  { name: "top_k", label: "top_k", kind: "number" },
  { name: "max_response_tokens", label: "Max tokens", kind: "number" },
  { name: "script_path", label: "Replay script", kind: "text" },
  { name: "endpoint_url", label: "Endpoint URL", kind: "text" },
  { name: "credential_ref", label: "Credential variable", kind: "text" },
  { name: "local_model_path", label: "Local model file", kind: "text" },
  { name: "language", label: "Interpreter", kind: "select:plantuml,graphviz" },
  { name: "output_format", label: "Output format", kind: "select:svg,png,txt" },
  { name: "renderer", label: "Renderer", kind: "select:external_process,http_renderer,builtin_fallback" },
];

export class App {
  readonly state: UiSessionState = {
    conversationId: null,
    pending: false,
    settings: { ...DEFAULT_SETTINGS },
  };

  private readonly root: HTMLElement;
  private readonly client: ApiClient;

  constructor(root: HTMLElement, client: ApiClient) {
    this.root = root;
    this.client = client;
    this.buildSkeleton();
    this.bindSettingsForm();
    this.bindPromptForm();
    this.refreshFormValidity();
  }

  // --- DOM scaffolding -------------------------------------------------------

  private buildSkeleton(): void {
    this.root.innerHTML = `
      <div class="layout">
        <aside class="settings">
          <h2>Settings</h2>
          <form id="settings-form"></form>
          <button id="apply-settings" type="button">Apply</button>
          <p id="settings-status" class="settings-status"></p>
        </aside>
        <main class="conversation">
          <div id="banner" class="banner" hidden></div>
          <div id="entries" class="entries"></div>
          <div id="progress" class="progress" hidden></div>
          <form id="prompt-form">
            <textarea id="prompt-box" rows="3"
              placeholder="Describe the model to create..."></textarea>
            <button id="send" type="submit">Send</button>
          </form>
        </main>
        <aside id="inspector" class="inspector" hidden></aside>
      </div>`;

    const form = this.query<HTMLFormElement>("#settings-form");
    for (const field of SETTINGS_FIELDS) {
      const row = document.createElement("label");
      row.className = "settings-row";
      row.textContent = field.label;
      let input: HTMLInputElement | HTMLSelectElement;
      if (field.kind.startsWith("select:")) {
        input = document.createElement("select");
        for (const option of field.kind.slice(7).split(",")) {
          const element = document.createElement("option");
          element.value = option;
          element.textContent = option;
          input.appendChild(element);
        }
      } else {
        input = document.createElement("input");
        input.type = field.kind;
        if (field.kind === "number") input.step = "any";
      }
      input.id = `setting-${field.name}`;
      input.setAttribute("name", field.name);
      input.value = String(this.state.settings[field.name]);
      row.appendChild(input);
      const issue = document.createElement("span");
      issue.className = "field-error";
      issue.id = `error-${field.name}`;
      row.appendChild(issue);
      form.appendChild(row);
    }
  }

  query<T extends Element>(selector: string): T {
    const element = this.root.querySelector<T>(selector);
    if (!element) throw new Error(`missing element: ${selector}`);
    return element;
  }

  // --- settings --------------------------------------------------------------

  private readSettings(): SettingsValues {
    const values = { ...this.state.settings };
    for (const field of SETTINGS_FIELDS) {
      const input = this.query<HTMLInputElement>(`#setting-${field.name}`);
      const raw = input.value;
      if (NUMERIC_FIELDS.has(field.name)) {
        (values as Record<string, unknown>)[field.name] = raw === "" ? NaN : Number(raw);
      } else {
        (values as Record<string, unknown>)[field.name] = raw;
      }
    }
    return values;
  }

  private refreshFormValidity(): boolean {
    const values = this.readSettings();
    const issues = validateSettings(values);
    for (const field of SETTINGS_FIELDS) {
      const slot = this.query<HTMLElement>(`#error-${field.name}`);
      slot.textContent = issues.find((i) => i.field === field.name)?.message ?? "";
    }
    const apply = this.query<HTMLButtonElement>("#apply-settings");
    apply.disabled = issues.length > 0;
    this.state.settings = values;
    return issues.length === 0;
  }

  private bindSettingsForm(): void {
    this.query<HTMLFormElement>("#settings-form").addEventListener("input", () => {
      this.refreshFormValidity();
    });
    this.query<HTMLButtonElement>("#apply-settings").addEventListener("click", () => {
      void this.applySettings();
    });
  }

  async applySettings(): Promise<void> {
    if (!this.refreshFormValidity()) return;
    const values = this.state.settings;
    const status = this.query<HTMLElement>("#settings-status");
    try {
      let conversation: Conversation;
      if (this.state.conversationId === null) {
        conversation = await this.client.createConversation(
          toLlmConfig(values), toInterpreterConfig(values));
        this.state.conversationId = conversation.id;
        status.textContent = `conversation ${conversation.id.slice(0, 8)} created`;
      } else {
        conversation = await this.client.reconfigure(
          this.state.conversationId, toLlmConfig(values), toInterpreterConfig(values));
        status.textContent = "configuration applied";
        const changed = conversation.entries.at(-1);
        if (changed && changed.role === "config_change") {
          this.appendEntryElement(diagnosticsPanel(changed.text));
        }
      }
      this.reflectServerConfig(conversation);
      this.hideBanner();
    } catch (error) {
      this.showError(error);
    }
  }

  // Sidebar reflects the server-confirmed configuration after a save.
  private reflectServerConfig(conversation: Conversation): void {
    const sampling = conversation.llm_config.sampling;
    const updates: Partial<SettingsValues> = {
      backend: conversation.llm_config.backend,
      model: conversation.llm_config.model.name,
      temperature: sampling.temperature,
      top_p: sampling.top_p,
      top_k: sampling.top_k,
      max_response_tokens: sampling.max_response_tokens,
      script_path: conversation.llm_config.script_path ?? "",
      endpoint_url: conversation.llm_config.endpoint_url ?? "",
      credential_ref: conversation.llm_config.credential_ref ?? "",
      local_model_path: conversation.llm_config.local_model_path ?? "",
      language: conversation.interpreter_config.language,
      output_format: conversation.interpreter_config.output_format,
      renderer: conversation.interpreter_config.renderer,
    };
    Object.assign(this.state.settings, updates);
    for (const field of SETTINGS_FIELDS) {
      const input = this.query<HTMLInputElement>(`#setting-${field.name}`);
      input.value = String(this.state.settings[field.name]);
    }
  }

  // --- prompting ---------------------------------------------------------------

  private bindPromptForm(): void {
    this.query<HTMLFormElement>("#prompt-form").addEventListener("submit", (event) => {
      event.preventDefault();
      void this.sendPrompt();
    });
  }

  private setPending(pending: boolean): void {
    this.state.pending = pending;
    this.query<HTMLTextAreaElement>("#prompt-box").disabled = pending;
    this.query<HTMLButtonElement>("#send").disabled = pending;
    const progress = this.query<HTMLElement>("#progress");
    progress.hidden = !pending;
    if (!pending) progress.textContent = "";
  }

  private appendEntryElement(element: HTMLElement): void {
    this.query<HTMLElement>("#entries").appendChild(element);
  }

  async sendPrompt(): Promise<void> {
    const box = this.query<HTMLTextAreaElement>("#prompt-box");
    const text = box.value.trim();
    if (!text || this.state.pending) return;
    if (this.state.conversationId === null) {
      await this.applySettings();
      if (this.state.conversationId === null) return;
    }
    // Optimistic user bubble; the engine remains the source of truth.
    this.appendEntryElement(userBubble(text));
    box.value = "";
    this.setPending(true);
    this.hideBanner();
    try {
      const outcome = await this.client.submitPrompt(
        this.state.conversationId, text, (stage) => this.showStage(stage));
      this.appendEntryElement(
        llmBubble(outcome.llm_entry, (entry) => void this.inspect(entry)));
      for (const entry of outcome.interpreter_entries) {
        if (entry.artifacts.length > 0) {
          this.appendEntryElement(await artifactPanel(
            this.client, entry, this.state.settings.output_format));
        } else {
          this.appendEntryElement(diagnosticsPanel(entry.text));
        }
      }
    } catch (error) {
      this.showError(error);
    } finally {
      this.setPending(false);
    }
  }

  private showStage(stage: StageName): void {
    this.query<HTMLElement>("#progress").textContent = `stage: ${stage}`;
  }

  // --- inspection ----------------------------------------------------------------

  async inspect(entry: DialogueEntry): Promise<void> {
    if (this.state.conversationId === null) return;
    try {
      const analysis = await this.client.analyzeEntry(this.state.conversationId, entry.seq);
      renderInspector(this.query<HTMLElement>("#inspector"), analysis);
    } catch (error) {
      this.showError(error);
    }
  }

  // --- errors ----------------------------------------------------------------------

  private showError(error: unknown): void {
    const banner = this.query<HTMLElement>("#banner");
    if (error instanceof ApiError) {
      banner.textContent = `${error.code}: ${error.message}`;
    } else {
      banner.textContent = String(error);
    }
    banner.hidden = false;
  }

  private hideBanner(): void {
    const banner = this.query<HTMLElement>("#banner");
    banner.hidden = true;
    banner.textContent = "";
  }
}

export function createApp(root: HTMLElement, client: ApiClient): App {
  return new App(root, client);
}
