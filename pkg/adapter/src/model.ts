/**
 * Lightweight trainable seq2seq used by the adapter's real mode.
 *
 * No pretrained weights are downloadable in this environment, so the model is
 * a retrieval-and-substitution transducer: /train memorizes (source, target)
 * pairs; generation retrieves the closest memorized sources by token Jaccard
 * and adapts their targets by substituting unmatched source tokens with the
 * input's novel tokens. Deterministic for a fixed memory state and seed.
 */

import { hashInt } from "./echo.js";

export interface TrainPair {
  source: string;
  target: string;
}

interface MemoryEntry {
  sourceTokens: string[];
  sourceSet: Set<string>;
  target: string;
  targetTokens: string[];
}

function tokenize(text: string): string[] {
  return text.toLowerCase().split(/\s+/).filter(Boolean);
}

function jaccard(a: Set<string>, b: Set<string>): number {
  if (a.size === 0 && b.size === 0) return 0;
  let inter = 0;
  for (const token of a) if (b.has(token)) inter += 1;
  return inter / (a.size + b.size - inter);
}

export class LightweightSeq2Seq {
  readonly modelName: string;
  readonly maxNewTokens: number;
  private memory: MemoryEntry[] = [];
  private trainedSteps = 0;

  constructor(modelName = "retrieval-transducer", maxNewTokens = 48) {
    this.modelName = modelName;
    this.maxNewTokens = maxNewTokens;
  }

  get steps(): number {
    return this.trainedSteps;
  }

  train(pairs: TrainPair[]): number {
    for (const pair of pairs) {
      const sourceTokens = tokenize(pair.source);
      this.memory.push({
        sourceTokens,
        sourceSet: new Set(sourceTokens),
        target: pair.target,
        targetTokens: tokenize(pair.target),
      });
    }
    this.trainedSteps += pairs.length;
    return pairs.length;
  }

  /** Adapt a memorized target: swap its input-unknown tokens for the input's novel tokens. */
  private adapt(entry: MemoryEntry, inputTokens: string[]): string {
    const inputSet = new Set(inputTokens);
    const novel = inputTokens.filter((t) => !entry.sourceSet.has(t));
    if (novel.length === 0) return entry.target;
    let cursor = 0;
    const swapped = entry.targetTokens.map((token) => {
      if (entry.sourceSet.has(token) && !inputSet.has(token)) {
        const replacement = novel[cursor % novel.length];
        cursor += 1;
        return replacement;
      }
      return token;
    });
    return swapped.join(" ") || entry.target;
  }

  private fallback(inputTokens: string[], seed: number, j: number): string {
    if (inputTokens.length === 0) return `unknown ${j}`;
    const rotation = Number(
      hashInt(seed, inputTokens.join(" "), j) % BigInt(inputTokens.length)
    );
    const rotated = inputTokens.slice(rotation).concat(inputTokens.slice(0, rotation));
    return rotated.slice(0, this.maxNewTokens).join(" ");
  }

  generate(input: string, k: number, seed: number | null): string[] {
    const s = seed ?? 0;
    const inputTokens = tokenize(input);
    const inputSet = new Set(inputTokens);
    const ranked = this.memory
      .map((entry, order) => ({ entry, order, score: jaccard(inputSet, entry.sourceSet) }))
      .filter((row) => row.score > 0)
      .sort((a, b) => b.score - a.score || a.order - b.order);

    const outputs: string[] = [];
    const push = (text: string) => {
      const trimmed = text.trim();
      if (trimmed && !outputs.includes(trimmed) && outputs.length < k) {
        outputs.push(trimmed);
      }
    };
    for (const row of ranked) {
      push(this.adapt(row.entry, inputTokens));
      push(row.entry.target);
      if (outputs.length >= k) break;
    }
    for (let j = 0; outputs.length < k && j < k * 4; j++) {
      push(this.fallback(inputTokens, s, j));
    }
    // exhausted distinct surface forms: pad with rank-marked variants
    for (let j = 1; outputs.length < k; j++) {
      push(`${outputs[0] ?? "unknown"} alt${j}`);
    }
    return outputs.slice(0, k);
  }
}

/** Feature-hashing sentence embedder: word + character-trigram counts. */
export class HashingEmbedder {
  readonly dim: number;

  constructor(dim = 64) {
    this.dim = dim;
  }

  embed(text: string): number[] {
    const vec = new Array<number>(this.dim).fill(0);
    const add = (feature: string, weight: number) => {
      vec[Number(hashInt(feature) % BigInt(this.dim))] += weight;
    };
    for (const token of tokenize(text)) {
      add(`w:${token}`, 1.0);
      const padded = `#${token}#`;
      for (let i = 0; i + 3 <= padded.length; i++) {
        add(`c:${padded.slice(i, i + 3)}`, 0.5);
      }
    }
    return vec;
  }
}
