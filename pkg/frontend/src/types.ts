// JSON shapes exchanged with the conversation service.

export interface SamplingParams {
  temperature: number;
  top_p: number;
  top_k: number;
  max_response_tokens: number;
  seed?: number;
}

export interface LlmConfig {
  backend: string;
  model: { name: string; context_window?: number; family?: string };
  sampling: SamplingParams;
  endpoint_url?: string;
  credential_ref?: string;
  local_model_path?: string;
  script_path?: string;
}

export interface InterpreterConfig {
  language: "plantuml" | "graphviz";
  output_format: "svg" | "png" | "txt";
  renderer: string;
  timeout_ms?: number;
  layout_engine?: string;
}

export interface DialogueEntry {
  seq: number;
  role: "user" | "llm" | "interpreter" | "system" | "config_change";
  text: string;
  artifacts: string[];
  detected_blocks: { language: string; origin: string; start: number; end: number }[];
  timestamp: string;
}

export interface Conversation {
  id: string;
  created_at: string;
  status: string;
  system_prompt: string | null;
  llm_config: LlmConfig;
  interpreter_config: InterpreterConfig;
  entries: DialogueEntry[];
}

export interface PromptOutcome {
  llm_entry: DialogueEntry;
  interpreter_entries: DialogueEntry[];
  warnings: string[];
}

export interface Diagnostic {
  severity: "error" | "warning";
  line: number;
  column: number;
  message: string;
  code: string;
}

export interface Analysis {
  language: string;
  diagnostics: { ok: boolean; diagnostics: Diagnostic[] };
  metrics: Record<string, unknown> | null;
  diff: {
    language: string;
    classes: CategoryDiff;
    enums: CategoryDiff;
    attributes: CategoryDiff;
    operations: CategoryDiff;
    relationships: CategoryDiff;
    nodes: CategoryDiff;
    edges: CategoryDiff;
  } | null;
}

export interface CategoryDiff {
  added: unknown[];
  removed: unknown[];
  modified: unknown[];
}

export interface ApiErrorBody {
  code: string;
  message: string;
  http_status: number;
}

export type StageName = "received" | "generated" | "validated" | "rendered" | "done";
