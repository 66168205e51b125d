// Minimal JSON-RPC 2.0 client for the pipeline backend.

export interface RpcErrorShape {
  code: number;
  message: string;
  data?: unknown;
}

export class RpcError extends Error {
  code: number;
  data?: unknown;

  constructor(err: RpcErrorShape) {
    super(err.message);
    this.code = err.code;
    this.data = err.data;
  }
}

export interface SessionStatus {
  state: string;
  last_completed_step: string;
  state_history: string[];
  versions: string[];
  active_head: string | null;
  warnings: string[];
  loop_running: boolean;
}

export interface VersionEntry {
  label: string;
  parent: string | null;
  artifact_digest: string;
  created_by: string;
  critique_ref: string | null;
  critique_summary: { suggestion_count: number; categories: string[] } | null;
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class RpcClient {
  private nextId = 1;

  constructor(
    private baseUrl: string,
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  async call<T>(method: string, params: Record<string, unknown> = {}): Promise<T> {
    const request = {
      jsonrpc: "2.0",
      id: this.nextId++,
      method,
      params,
    };
    const response = await this.fetchFn(`${this.baseUrl}/rpc`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(request),
    });
    const payload = await response.json();
    if (payload.error) {
      throw new RpcError(payload.error as RpcErrorShape);
    }
    return payload.result as T;
  }

  previewUrl(sessionId: string, label: string): string {
    return `${this.baseUrl}/preview/${sessionId}/${label}/`;
  }

  createSession(prompt: string, sketchSvg: string): Promise<{ session_id: string }> {
    return this.call("session.create", {
      prompt,
      sketch_b64: base64Encode(sketchSvg),
      sketch_format: "svg",
    });
  }

  runPipeline(sessionId: string, maxVersions = 4): Promise<{ started: boolean }> {
    return this.call("pipeline.run", {
      session_id: sessionId,
      max_versions: maxVersions,
    });
  }

  status(sessionId: string): Promise<SessionStatus> {
    return this.call("session.status", { session_id: sessionId });
  }

  listVersions(sessionId: string): Promise<VersionEntry[]> {
    return this.call("session.list_versions", { session_id: sessionId });
  }

  branchFrom(sessionId: string, label: string): Promise<{ active_head: string }> {
    return this.call("session.branch_from", { session_id: sessionId, label });
  }

  runLoop(sessionId: string): Promise<{ versions: string[] }> {
    return this.call("critic.run_loop", { session_id: sessionId });
  }

  getPrd(sessionId: string): Promise<{ markdown: string }> {
    return this.call("session.get_prd", { session_id: sessionId });
  }
}

export function base64Encode(text: string): string {
  const bytes = new TextEncoder().encode(text);
  let binary = "";
  for (const b of bytes) {
    binary += String.fromCharCode(b);
  }
  // btoa exists in browsers; Buffer covers the test runtime.
  if (typeof btoa === "function") {
    return btoa(binary);
  }
  return Buffer.from(bytes).toString("base64");
}
