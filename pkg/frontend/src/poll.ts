// Poll session.status until the pipeline reaches a terminal state.

import { RpcClient, SessionStatus } from "./rpc.js";

export interface PollOptions {
  intervalMs?: number;
  maxPolls?: number;
  sleep?: (ms: number) => Promise<void>;
}

const defaultSleep = (ms: number) =>
  new Promise<void>((resolve) => setTimeout(resolve, ms));

export const TERMINAL_STATES = new Set(["complete", "failed"]);

export async function pollUntilDone(
  client: RpcClient,
  sessionId: string,
  onUpdate: (status: SessionStatus) => void,
  options: PollOptions = {},
): Promise<SessionStatus> {
  const intervalMs = options.intervalMs ?? 500;
  const maxPolls = options.maxPolls ?? 600;
  const sleep = options.sleep ?? defaultSleep;
  let status = await client.status(sessionId);
  onUpdate(status);
  let polls = 1;
  while (!TERMINAL_STATES.has(status.state) && polls < maxPolls) {
    await sleep(intervalMs);
    status = await client.status(sessionId);
    onUpdate(status);
    polls++;
  }
  return status;
}
