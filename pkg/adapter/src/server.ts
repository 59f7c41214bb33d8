/**
 * HTTP model server implementing the training-loop wire protocol:
 * POST /generate, POST /train, POST /embed (embedder role), GET /health.
 *
 * Requests are validated against the JSON schemas shipped in ../protocol;
 * schema violations answer 400, a concurrent /train answers 409, and /health
 * answers 503 until the model is loaded.
 */

import { readFileSync } from "node:fs";
import { appendFileSync, mkdirSync } from "node:fs";
import { join } from "node:path";

import { Ajv, type ValidateFunction } from "ajv";
import express, { type Express, type Request, type Response } from "express";

import { echoBackward, echoEmbed, echoForward } from "./echo.js";
import { HashingEmbedder, LightweightSeq2Seq, type TrainPair } from "./model.js";

export type Role = "forward" | "backward" | "embedder";
export type Mode = "real" | "echo";

export interface AdapterConfig {
  role: Role;
  mode: Mode;
  modelName?: string;
  device?: string;
  maxNewTokens?: number;
  spoolDir?: string;
  /** artificial training latency, for exercising the 409 path in tests */
  trainDelayMs?: number;
  /** start with /health at 503 until markReady() is called */
  startUnready?: boolean;
}

export interface AdapterHandle {
  app: Express;
  config: AdapterConfig;
  model: LightweightSeq2Seq | null;
  markReady: () => void;
}

function loadSchema(ajv: Ajv, name: string): ValidateFunction {
  const url = new URL(`../../protocol/${name}.schema.json`, import.meta.url);
  return ajv.compile(JSON.parse(readFileSync(url, "utf8")));
}

const sleep = (ms: number) => new Promise((resolve) => setTimeout(resolve, ms));

export function createAdapter(config: AdapterConfig): AdapterHandle {
  const ajv = new Ajv({ allErrors: true });
  const validateGenerate = loadSchema(ajv, "generate_request");
  const validateTrain = loadSchema(ajv, "train_request");
  const validateEmbed = loadSchema(ajv, "embed_request");

  const model =
    config.role === "embedder"
      ? null
      : new LightweightSeq2Seq(config.modelName, config.maxNewTokens);
  const embedder = new HashingEmbedder();

  let ready = !config.startUnready;
  let trainBusy = false;
  let trainCount = 0;
  if (config.spoolDir) mkdirSync(config.spoolDir, { recursive: true });

  const app = express();
  app.use(express.json({ limit: "16mb" }));

  const notReady = (res: Response): boolean => {
    if (!ready) {
      res.status(503).json({ error: "model not loaded" });
      return true;
    }
    return false;
  };

  app.get("/health", (_req, res) => {
    if (notReady(res)) return;
    res.json({ status: "ok", role: config.role, mode: config.mode });
  });

  if (config.role !== "embedder") {
    app.post("/generate", (req: Request, res: Response) => {
      if (notReady(res)) return;
      if (!validateGenerate(req.body)) {
        res.status(400).json({ error: ajv.errorsText(validateGenerate.errors) });
        return;
      }
      const body = req.body as { inputs: string[]; k: number; seed?: number | null };
      const { inputs, k } = body;
      const seed = body.seed ?? null;
      const outputs = inputs.map((text) => {
        if (config.mode === "echo") {
          return config.role === "backward"
            ? echoBackward(text, k, seed)
            : echoForward(text, k, seed);
        }
        return model!.generate(text, k, seed);
      });
      res.json({ outputs });
    });

    app.post("/train", async (req: Request, res: Response) => {
      if (notReady(res)) return;
      if (!validateTrain(req.body)) {
        res.status(400).json({ error: ajv.errorsText(validateTrain.errors) });
        return;
      }
      if (trainBusy) {
        res.status(409).json({ error: "training already in progress" });
        return;
      }
      trainBusy = true;
      try {
        const pairs = (req.body as { pairs: TrainPair[] }).pairs;
        if (config.trainDelayMs) await sleep(config.trainDelayMs);
        trainCount += 1;
        if (config.spoolDir) {
          const path = join(
            config.spoolDir,
            `train_${String(trainCount).padStart(4, "0")}.jsonl`
          );
          for (const pair of pairs) {
            appendFileSync(path, JSON.stringify(pair) + "\n", "utf8");
          }
        }
        const steps = config.mode === "echo" ? pairs.length : model!.train(pairs);
        res.json({ status: "completed", steps });
      } finally {
        trainBusy = false;
      }
    });
  }

  if (config.role === "embedder") {
    app.post("/embed", (req: Request, res: Response) => {
      if (notReady(res)) return;
      if (!validateEmbed(req.body)) {
        res.status(400).json({ error: ajv.errorsText(validateEmbed.errors) });
        return;
      }
      const texts = (req.body as { texts: string[] }).texts;
      const vectors =
        config.mode === "echo"
          ? texts.map((t) => echoEmbed(t))
          : texts.map((t) => embedder.embed(t));
      res.json({ vectors, dim: vectors[0].length });
    });
  }

  app.use((_req, res) => {
    res.status(404).json({ error: "not found" });
  });

  // malformed JSON bodies and handler bugs
  app.use(
    (err: Error, _req: Request, res: Response, _next: express.NextFunction) => {
      const status = (err as { status?: number }).status === 400 ? 400 : 500;
      res.status(status).json({ error: err.message });
    }
  );

  return {
    app,
    config,
    model,
    markReady: () => {
      ready = true;
    },
  };
}
