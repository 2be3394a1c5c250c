// Thin typed client over the service HTTP surface. The UI never talks to
// LLM backends or renderers directly.

import type {
  Analysis,
  ApiErrorBody,
  Conversation,
  InterpreterConfig,
  LlmConfig,
  PromptOutcome,
  StageName,
} from "./types";

export class ApiError extends Error {
  readonly code: string;
  readonly status: number;

  constructor(body: ApiErrorBody, status: number) {
    super(body.message ?? "request failed");
    this.code = body.code ?? "error";
    this.status = status;
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

async function asJson<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let body: ApiErrorBody;
    try {
      body = (await response.json()) as ApiErrorBody;
    } catch {
      body = { code: "error", message: response.statusText, http_status: response.status };
    }
    throw new ApiError(body, response.status);
  }
  return (await response.json()) as T;
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  artifactUrl(hash: string): string {
    return `${this.baseUrl}/api/artifacts/${hash}`;
  }

  async createConversation(
    llmConfig: LlmConfig,
    interpreterConfig: InterpreterConfig,
  ): Promise<Conversation> {
    const response = await this.fetchFn(`${this.baseUrl}/api/conversations`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ llm_config: llmConfig, interpreter_config: interpreterConfig }),
    });
    const body = await asJson<{ conversation: Conversation }>(response);
    return body.conversation;
  }

  async reconfigure(
    conversationId: string,
    llmConfig: LlmConfig | null,
    interpreterConfig: InterpreterConfig | null,
  ): Promise<Conversation> {
    const payload: Record<string, unknown> = {};
    if (llmConfig) payload.llm_config = llmConfig;
    if (interpreterConfig) payload.interpreter_config = interpreterConfig;
    const response = await this.fetchFn(
      `${this.baseUrl}/api/conversations/${conversationId}/config`,
      {
        method: "PATCH",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(payload),
      },
    );
    const body = await asJson<{ conversation: Conversation }>(response);
    return body.conversation;
  }

  async getConversation(conversationId: string): Promise<Conversation> {
    const response = await this.fetchFn(`${this.baseUrl}/api/conversations/${conversationId}`);
    const body = await asJson<{ conversation: Conversation }>(response);
    return body.conversation;
  }

  async fetchArtifactText(hash: string): Promise<string> {
    const response = await this.fetchFn(this.artifactUrl(hash));
    if (!response.ok) throw new ApiError(
      { code: "not_found", message: `artifact ${hash}`, http_status: response.status },
      response.status,
    );
    return await response.text();
  }

  async analyzeEntry(conversationId: string, seq: number): Promise<Analysis> {
    const response = await this.fetchFn(
      `${this.baseUrl}/api/conversations/${conversationId}/analysis?seq=${seq}`,
    );
    const body = await asJson<{ analysis: Analysis }>(response);
    return body.analysis;
  }

  // Submits a prompt, preferring the stage event stream; falls back to a
  // plain JSON response when the server answers without a stream.
  async submitPrompt(
    conversationId: string,
    text: string,
    onStage?: (stage: StageName) => void,
  ): Promise<PromptOutcome> {
    const response = await this.fetchFn(
      `${this.baseUrl}/api/conversations/${conversationId}/prompts`,
      {
        method: "POST",
        headers: {
          "Content-Type": "application/json",
          Accept: "text/event-stream, application/json",
        },
        body: JSON.stringify({ text }),
      },
    );
    const contentType = response.headers.get("content-type") ?? "";
    if (!contentType.includes("text/event-stream")) {
      const body = await asJson<{ outcome: PromptOutcome }>(response);
      return body.outcome;
    }
    return this.consumeEventStream(response, onStage);
  }

  private async consumeEventStream(
    response: Response,
    onStage?: (stage: StageName) => void,
  ): Promise<PromptOutcome> {
    const raw = await response.text();
    let outcome: PromptOutcome | null = null;
    for (const frame of raw.split("\n\n")) {
      if (!frame.trim()) continue;
      const lines = frame.split("\n");
      const event = lines.find((l) => l.startsWith("event: "))?.slice(7) ?? "message";
      const data = lines.find((l) => l.startsWith("data: "))?.slice(6) ?? "{}";
      if (event === "stage") {
        const parsed = JSON.parse(data) as { stage: StageName };
        onStage?.(parsed.stage);
      } else if (event === "done") {
        outcome = JSON.parse(data) as PromptOutcome;
      } else if (event === "error") {
        const body = JSON.parse(data) as ApiErrorBody;
        throw new ApiError(body, body.http_status ?? 502);
      }
    }
    if (!outcome) {
      throw new ApiError(
        { code: "error", message: "stream ended without an outcome", http_status: 502 },
        502,
      );
    }
    return outcome;
  }
}
