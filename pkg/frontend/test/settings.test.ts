import { describe, expect, it } from "vitest";

import {
  DEFAULT_SETTINGS,
  toInterpreterConfig,
  toLlmConfig,
  validateSettings,
} from "../src/settings";

function settings(overrides: Partial<typeof DEFAULT_SETTINGS> = {}) {
  return { ...DEFAULT_SETTINGS, script_path: "/scripts/s.json", ...overrides };
}

describe("validateSettings", () => {
  it("accepts the defaults with a script path", () => {
    expect(validateSettings(settings())).toEqual([]);
  });

  it("rejects top_p of zero", () => {
    const issues = validateSettings(settings({ top_p: 0 }));
    expect(issues.map((i) => i.field)).toContain("top_p");
  });

  it("rejects top_p above one", () => {
    expect(validateSettings(settings({ top_p: 1.2 }))).not.toEqual([]);
  });

  it("rejects negative temperature", () => {
    const issues = validateSettings(settings({ temperature: -0.5 }));
    expect(issues.map((i) => i.field)).toContain("temperature");
  });

  it("rejects fractional top_k", () => {
    expect(validateSettings(settings({ top_k: 1.5 }))).not.toEqual([]);
  });

  it("requires a replay script for the replay backend", () => {
    const issues = validateSettings(settings({ script_path: "" }));
    expect(issues.map((i) => i.field)).toContain("script_path");
  });

  it("requires endpoint and credential for remote backends", () => {
    const issues = validateSettings(settings({ backend: "remote_chat_api" }));
    expect(issues.map((i) => i.field)).toContain("endpoint_url");
  });
});

describe("payload builders", () => {
  it("maps sampling values verbatim", () => {
    const config = toLlmConfig(settings({ temperature: 0.2, top_k: 10 }));
    expect(config.sampling).toEqual({
      temperature: 0.2,
      top_p: 0.9,
      top_k: 10,
      max_response_tokens: 1024,
    });
    expect(config.backend).toBe("replay");
    expect(config.script_path).toBe("/scripts/s.json");
  });

  it("omits unset optional fields", () => {
    const config = toLlmConfig(settings());
    expect(config).not.toHaveProperty("endpoint_url");
    expect(config).not.toHaveProperty("local_model_path");
  });

  it("builds the interpreter config", () => {
    expect(toInterpreterConfig(settings({ language: "graphviz", output_format: "svg" })))
      .toEqual({ language: "graphviz", output_format: "svg", renderer: "builtin_fallback" });
  });
});
