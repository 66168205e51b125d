import { describe, expect, it } from "vitest";

import { base64Encode, RpcClient, RpcError } from "../src/rpc.js";

function fakeFetch(result: unknown, error?: { code: number; message: string }) {
  const calls: Array<{ url: string; body: any }> = [];
  const fetchFn = async (url: string, init?: RequestInit) => {
    const body = JSON.parse(String(init?.body));
    calls.push({ url, body });
    const payload = error
      ? { jsonrpc: "2.0", id: body.id, error }
      : { jsonrpc: "2.0", id: body.id, result };
    return { json: async () => payload } as Response;
  };
  return { calls, fetchFn };
}

describe("RpcClient", () => {
  it("posts well-formed JSON-RPC 2.0 envelopes to /rpc", async () => {
    const { calls, fetchFn } = fakeFetch({ ok: true });
    const client = new RpcClient("http://backend:1", fetchFn);
    await client.call("session.status", { session_id: "s1" });
    expect(calls).toHaveLength(1);
    expect(calls[0].url).toBe("http://backend:1/rpc");
    expect(calls[0].body.jsonrpc).toBe("2.0");
    expect(calls[0].body.method).toBe("session.status");
    expect(calls[0].body.params).toEqual({ session_id: "s1" });
    expect(typeof calls[0].body.id).toBe("number");
  });

  it("increments request ids", async () => {
    const { calls, fetchFn } = fakeFetch({});
    const client = new RpcClient("http://b", fetchFn);
    await client.call("a");
    await client.call("b");
    expect(calls[1].body.id).toBe(calls[0].body.id + 1);
  });

  it("turns error payloads into RpcError", async () => {
    const { fetchFn } = fakeFetch(null, { code: -32004, message: "branch busy" });
    const client = new RpcClient("http://b", fetchFn);
    await expect(client.call("critic.run_loop")).rejects.toThrowError(RpcError);
    await expect(client.call("critic.run_loop")).rejects.toMatchObject({
      code: -32004,
    });
  });

  it("encodes the sketch as base64 for session.create", async () => {
    const { calls, fetchFn } = fakeFetch({ session_id: "s9" });
    const client = new RpcClient("http://b", fetchFn);
    const svg = '<svg xmlns="http://www.w3.org/2000/svg"></svg>';
    await client.createSession("my site", svg);
    const params = calls[0].body.params;
    expect(params.prompt).toBe("my site");
    expect(Buffer.from(params.sketch_b64, "base64").toString()).toBe(svg);
    expect(params.sketch_format).toBe("svg");
  });

  it("builds preview URLs for sandboxed frames", () => {
    const client = new RpcClient("http://b:8787");
    expect(client.previewUrl("abc", "v2")).toBe("http://b:8787/preview/abc/v2/");
  });

  it("base64Encode round-trips UTF-8", () => {
    const text = "sketch ✏️";
    expect(Buffer.from(base64Encode(text), "base64").toString("utf-8")).toBe(text);
  });
});
