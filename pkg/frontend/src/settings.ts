// Settings sidebar state: backend, model, sampling knobs, interpreter and
// output format. Values are validated against the same bounds the server
// enforces; submission stays disabled while anything is out of range.

import type { InterpreterConfig, LlmConfig } from "./types";

export interface SettingsValues {
  backend: string;
  model: string;
  temperature: number;
  top_p: number;
  top_k: number;
  max_response_tokens: number;
  script_path: string;
  endpoint_url: string;
  credential_ref: string;
  local_model_path: string;
  language: "plantuml" | "graphviz";
  output_format: "svg" | "png" | "txt";
  renderer: string;
}

export const DEFAULT_SETTINGS: SettingsValues = {
  backend: "replay",
  model: "replay",
  temperature: 0.7,
  top_p: 0.9,
  top_k: 40,
  max_response_tokens: 1024,
  script_path: "",
  endpoint_url: "",
  credential_ref: "",
  local_model_path: "",
  language: "plantuml",
  output_format: "txt",
  renderer: "builtin_fallback",
};

export interface FieldIssue {
  field: string;
  message: string;
}

export function validateSettings(values: SettingsValues): FieldIssue[] {
  const issues: FieldIssue[] = [];
  if (!Number.isFinite(values.temperature) || values.temperature < 0) {
    issues.push({ field: "temperature", message: "must be >= 0" });
  }
  if (!Number.isFinite(values.top_p) || values.top_p <= 0 || values.top_p > 1) {
    issues.push({ field: "top_p", message: "must be in (0, 1]" });
  }
  if (!Number.isInteger(values.top_k) || values.top_k < 0) {
    issues.push({ field: "top_k", message: "must be an integer >= 0" });
  }
  if (!Number.isInteger(values.max_response_tokens) || values.max_response_tokens < 1) {
    issues.push({ field: "max_response_tokens", message: "must be an integer >= 1" });
  }
  if (!values.model.trim()) {
    issues.push({ field: "model", message: "required" });
  }
  if (values.backend === "replay" && !values.script_path.trim()) {
    issues.push({ field: "script_path", message: "required for the replay backend" });
  }
  if (
    (values.backend === "remote_chat_api" || values.backend === "remote_replicate_style") &&
    (!values.endpoint_url.trim() || !values.credential_ref.trim())
  ) {
    issues.push({ field: "endpoint_url", message: "endpoint and credential name required" });
  }
  if (values.backend === "local_process" && !values.local_model_path.trim()) {
    issues.push({ field: "local_model_path", message: "required for local inference" });
  }
  return issues;
}

export function toLlmConfig(values: SettingsValues): LlmConfig {
  const config: LlmConfig = {
    backend: values.backend,
    model: { name: values.model },
    sampling: {
      temperature: values.temperature,
      top_p: values.top_p,
      top_k: values.top_k,
      max_response_tokens: values.max_response_tokens,
    },
  };
  if (values.script_path) config.script_path = values.script_path;
  if (values.endpoint_url) config.endpoint_url = values.endpoint_url;
  if (values.credential_ref) config.credential_ref = values.credential_ref;
  if (values.local_model_path) config.local_model_path = values.local_model_path;
  return config;
}

export function toInterpreterConfig(values: SettingsValues): InterpreterConfig {
  return {
    language: values.language,
    output_format: values.output_format,
    renderer: values.renderer,
  };
}
