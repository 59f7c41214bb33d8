import { readFileSync } from "node:fs";
import type { Server } from "node:http";

import { Ajv, type ValidateFunction } from "ajv";

import { createAdapter, type AdapterConfig, type AdapterHandle } from "../src/server.js";

export interface RunningAdapter {
  handle: AdapterHandle;
  server: Server;
  url: string;
}

export async function startAdapter(config: AdapterConfig): Promise<RunningAdapter> {
  const handle = createAdapter(config);
  const server = handle.app.listen(0);
  await new Promise<void>((resolve) => server.once("listening", resolve));
  const address = server.address();
  if (address === null || typeof address === "string") {
    throw new Error("no port assigned");
  }
  return { handle, server, url: `http://127.0.0.1:${address.port}` };
}

export function stopAdapter(running: RunningAdapter): Promise<void> {
  return new Promise((resolve) => running.server.close(() => resolve()));
}

export async function post(
  url: string,
  path: string,
  body: unknown
): Promise<{ status: number; json: any }> {
  const response = await fetch(url + path, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(body),
  });
  return { status: response.status, json: await response.json() };
}

const ajv = new Ajv({ allErrors: true });
const cache = new Map<string, ValidateFunction>();

export function schema(name: string): ValidateFunction {
  let validate = cache.get(name);
  if (!validate) {
    const url = new URL(`../../protocol/${name}.schema.json`, import.meta.url);
    validate = ajv.compile(JSON.parse(readFileSync(url, "utf8")));
    cache.set(name, validate);
  }
  return validate;
}

export function assertValid(name: string, payload: unknown): void {
  const validate = schema(name);
  if (!validate(payload)) {
    throw new Error(`${name} schema violation: ${ajv.errorsText(validate.errors)}`);
  }
}
