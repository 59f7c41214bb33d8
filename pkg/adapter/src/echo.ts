/**
 * Deterministic echo generation rules.
 *
 * These mirror the rule-based mock used by the orchestrator's own test
 * fixtures, so a pipeline exercised against either implementation sees the
 * same transforms:
 *  - backward (question -> triplet sequence): consecutive token pairs joined
 *    as "t_i rel{(i+j+seed)%3} t_{i+1}" with " </s> " between triplets;
 *  - forward (triplet sequence -> question): entities are the 1st and 3rd
 *    word of each </s>-chunk (order-preserving dedup), rendered through a
 *    sha1-hash-chosen template; template 3 is deliberately lossy;
 *  - embed: 32-dim hashed bag of words.
 */

import { createHash } from "node:crypto";

export function hashInt(...parts: (string | number)[]): bigint {
  const joined = parts.map(String).join(":");
  const hex = createHash("sha1").update(joined, "utf8").digest("hex");
  return BigInt("0x" + hex);
}

function tokens(text: string): string[] {
  return text.toLowerCase().split(/\s+/).filter(Boolean);
}

export function echoBackward(text: string, k: number, seed: number | null): string[] {
  const s = seed ?? 0;
  const toks = tokens(text);
  const variants: string[] = [];
  for (let j = 0; j < k; j++) {
    if (toks.length === 1) {
      variants.push(`${toks[0]} rel${(j + s) % 3} ${toks[0]}`);
    } else {
      const triplets: string[] = [];
      for (let i = 0; i < toks.length - 1; i++) {
        triplets.push(`${toks[i]} rel${(i + j + s) % 3} ${toks[i + 1]}`);
      }
      variants.push(triplets.join(" </s> "));
    }
  }
  return variants;
}

export function echoForward(text: string, k: number, seed: number | null): string[] {
  const s = seed ?? 0;
  const entities: string[] = [];
  for (const chunk of text.toLowerCase().split("</s>")) {
    const words = chunk.split(/\s+/).filter(Boolean);
    for (const position of [0, 2]) {
      if (position < words.length && !entities.includes(words[position])) {
        entities.push(words[position]);
      }
    }
  }
  if (entities.length === 0) entities.push("nothing");
  const variants: string[] = [];
  for (let j = 0; j < k; j++) {
    const templateId = Number(hashInt(s, text, j) % 4n);
    const joined = entities.join(" ");
    if (templateId === 0) variants.push(`what is ${joined} ?`);
    else if (templateId === 1) variants.push(`who ${joined} ?`);
    else if (templateId === 2) variants.push(`${joined} is what ?`);
    else variants.push(`what is ${entities[0]} ?`);
  }
  return variants;
}

export function echoEmbed(text: string, dim = 32): number[] {
  const vec = new Array<number>(dim).fill(0);
  for (const token of tokens(text)) {
    vec[Number(hashInt(token) % BigInt(dim))] += 1;
  }
  return vec;
}
