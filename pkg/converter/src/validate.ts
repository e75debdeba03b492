/**
 * Structural validation of an emitted dataset directory, mirroring the
 * rules the consuming loader enforces: file-by-file syntax, id ranges,
 * strict ordering, and disjoint splits. Returns human-readable violations
 * instead of throwing, so callers can report all problems at once.
 */

import * as fs from "node:fs";
import * as path from "node:path";

const INT_RE = /^[+-]?\d+$/;
const FLOAT_RE = /^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$/;

/** Split file content into lines the way the consumer does. */
function readLines(text: string): string[] {
  if (text === "") return [];
  if (text.endsWith("\n")) text = text.slice(0, -1);
  return text.split("\n");
}

function parseIntStrict(text: string): number | null {
  const trimmed = text.trim();
  if (!INT_RE.test(trimmed)) return null;
  return parseInt(trimmed, 10);
}

export function validateDirectory(dir: string): string[] {
  const problems: string[] = [];
  const read = (name: string): string | null => {
    try {
      return fs.readFileSync(path.join(dir, name), "utf-8");
    } catch {
      problems.push(`missing ${name}`);
      return null;
    }
  };

  const metaText = read("meta.json");
  if (metaText === null) return problems; // nothing else can be checked
  let meta: Record<string, unknown>;
  try {
    meta = JSON.parse(metaText) as Record<string, unknown>;
  } catch (err) {
    problems.push(`meta.json: invalid JSON (${(err as Error).message})`);
    return problems;
  }
  for (const key of ["name", "num_nodes", "num_features", "num_classes"]) {
    if (!(key in meta)) problems.push(`meta.json: missing key ${key}`);
  }
  const numNodes = Number(meta["num_nodes"] ?? 0);
  const numFeatures = Number(meta["num_features"] ?? 0);
  const numClasses = Number(meta["num_classes"] ?? 0);
  if (!(numNodes >= 1 && numFeatures >= 1 && numClasses >= 1)) {
    problems.push("meta.json: counts must be positive");
    return problems;
  }

  const edgesText = read("graph.edges");
  if (edgesText !== null) {
    const seen = new Set<number>();
    readLines(edgesText).forEach((line, i) => {
      const where = `graph.edges:${i + 1}`;
      const parts = line.split(/\s+/).filter((p) => p !== "");
      const u = parts.length === 2 ? parseIntStrict(parts[0]!) : null;
      const v = parts.length === 2 ? parseIntStrict(parts[1]!) : null;
      if (u === null || v === null) {
        problems.push(`${where}: expected 'u v', got ${JSON.stringify(line)}`);
        return;
      }
      if (u < 0 || u >= numNodes || v < 0 || v >= numNodes) {
        problems.push(`${where}: endpoint out of range [0, ${numNodes})`);
      } else if (u >= v) {
        problems.push(`${where}: edges must satisfy u < v, got ${u} ${v}`);
      } else if (seen.has(u * numNodes + v)) {
        problems.push(`${where}: duplicate edge ${u} ${v}`);
      } else {
        seen.add(u * numNodes + v);
      }
    });
  }

  const featureText = read("features.sparse");
  if (featureText !== null) {
    const lines = readLines(featureText);
    if (lines.length !== numNodes) {
      problems.push(`features.sparse: expected ${numNodes} lines, ` +
                    `got ${lines.length}`);
    }
    lines.forEach((line, i) => {
      const where = `features.sparse:${i + 1}`;
      if (line === "") return;
      let prevCol = -1;
      for (const token of line.split(" ")) {
        const at = token.indexOf(":");
        if (at < 0) {
          problems.push(`${where}: expected col:value, got ` +
                        `${JSON.stringify(token)}`);
          return;
        }
        const col = parseIntStrict(token.slice(0, at));
        const valueText = token.slice(at + 1);
        if (col === null) {
          problems.push(`${where}: bad column in ${JSON.stringify(token)}`);
          return;
        }
        if (col < 0 || col >= numFeatures) {
          problems.push(`${where}: column ${col} out of range ` +
                        `[0, ${numFeatures})`);
          return;
        }
        if (col <= prevCol) {
          problems.push(`${where}: columns must increase strictly ` +
                        `(${col} after ${prevCol})`);
          return;
        }
        prevCol = col;
        if (!FLOAT_RE.test(valueText) || !Number.isFinite(Number(valueText))) {
          problems.push(`${where}: bad value ${JSON.stringify(valueText)}`);
          return;
        }
      }
    });
  }

  const labelText = read("labels.txt");
  if (labelText !== null) {
    const lines = readLines(labelText);
    if (lines.length !== numNodes) {
      problems.push(`labels.txt: expected ${numNodes} lines, ` +
                    `got ${lines.length}`);
    }
    lines.forEach((line, i) => {
      const label = parseIntStrict(line);
      if (label === null || label < 0 || label >= numClasses) {
        problems.push(`labels.txt:${i + 1}: label ${line.trim()} out of ` +
                      `range [0, ${numClasses})`);
      }
    });
  }

  const splits = new Map<string, number[]>();
  for (const split of ["train", "val", "test"]) {
    const text = read(`split.${split}`);
    if (text === null) continue;
    const ids: number[] = [];
    let prev = -1;
    let ok = true;
    readLines(text).forEach((line, i) => {
      const where = `split.${split}:${i + 1}`;
      const v = parseIntStrict(line);
      if (v === null || v < 0 || v >= numNodes) {
        problems.push(`${where}: node id ${line.trim()} out of range ` +
                      `[0, ${numNodes})`);
        ok = false;
        return;
      }
      if (v <= prev) {
        problems.push(`${where}: ids must be sorted strictly increasing ` +
                      `(${v} after ${prev})`);
        ok = false;
        return;
      }
      prev = v;
      ids.push(v);
    });
    if (ok) splits.set(split, ids);
  }
  const pairs: Array<[string, string]> = [
    ["train", "val"], ["train", "test"], ["val", "test"],
  ];
  for (const [a, b] of pairs) {
    const left = splits.get(a);
    const right = splits.get(b);
    if (!left || !right) continue;
    const inLeft = new Set(left);
    const overlap = right.find((v) => inLeft.has(v));
    if (overlap !== undefined) {
      problems.push(`split.${a}/split.${b}: overlapping node id ${overlap}`);
    }
  }
  return problems;
}
