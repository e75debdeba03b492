/**
 * Load and sanity-check one upstream Planetoid distribution: the eight
 * `ind.<name>.*` files holding pickled feature matrices, one-hot labels,
 * the adjacency dict, and the permuted test-node index list.
 */

import * as fs from "node:fs";
import * as path from "node:path";
import { CSRMatrix, NDArray, decodePickle, PickleError } from "./pickle.js";

export class ConvertError extends Error {}

export const DATASET_NAMES = ["cora", "citeseer", "pubmed"] as const;
export type DatasetName = (typeof DATASET_NAMES)[number];

export interface PlanetoidBundle {
  name: DatasetName;
  /** Labeled-training features / one-hot labels (rows 0..nTrain). */
  x: CSRMatrix;
  y: NDArray;
  /** Test features / labels, rows aligned with testIndex entries. */
  tx: CSRMatrix;
  ty: NDArray;
  /** Training + unlabeled features / labels (rows 0..nAll). */
  allx: CSRMatrix;
  ally: NDArray;
  /** Adjacency: node id -> neighbor ids (possibly one-directional). */
  graph: Map<number, number[]>;
  /** Graph node id assigned to each tx/ty row, in file order. */
  testIndex: number[];
}

function readPickled(src: string, file: string): unknown {
  const full = path.join(src, file);
  let raw: Buffer;
  try {
    raw = fs.readFileSync(full);
  } catch {
    throw new ConvertError(`missing distribution file: ${full}`);
  }
  try {
    return decodePickle(raw);
  } catch (err) {
    if (err instanceof PickleError) {
      throw new ConvertError(`${full}: ${err.message}`);
    }
    throw err;
  }
}

function expectCSR(value: unknown, file: string): CSRMatrix {
  if (!(value instanceof CSRMatrix)) {
    throw new ConvertError(`${file} does not hold a CSR matrix`);
  }
  return value;
}

function expectLabels(value: unknown, file: string): NDArray {
  if (!(value instanceof NDArray) || value.shape.length !== 2) {
    throw new ConvertError(`${file} does not hold a 2-d label array`);
  }
  return value;
}

function expectGraph(value: unknown, file: string): Map<number, number[]> {
  if (!(value instanceof Map)) {
    throw new ConvertError(`${file} does not hold an adjacency dict`);
  }
  const graph = new Map<number, number[]>();
  for (const [key, neighbors] of value) {
    if (typeof key !== "number" || !Number.isInteger(key)) {
      throw new ConvertError(`${file}: non-integer node id ${String(key)}`);
    }
    if (!Array.isArray(neighbors)) {
      throw new ConvertError(`${file}: neighbor list of ${key} is not a list`);
    }
    for (const n of neighbors) {
      if (typeof n !== "number" || !Number.isInteger(n)) {
        throw new ConvertError(
          `${file}: non-integer neighbor ${String(n)} of node ${key}`);
      }
    }
    graph.set(key, neighbors as number[]);
  }
  return graph;
}

function readTestIndex(src: string, name: string): number[] {
  const full = path.join(src, `ind.${name}.test.index`);
  let text: string;
  try {
    text = fs.readFileSync(full, "ascii");
  } catch {
    throw new ConvertError(`missing distribution file: ${full}`);
  }
  const ids: number[] = [];
  for (const line of text.split("\n")) {
    if (line === "") continue;
    const id = Number(line);
    if (!Number.isInteger(id) || id < 0) {
      throw new ConvertError(`${full}: bad test index line ${JSON.stringify(line)}`);
    }
    ids.push(id);
  }
  if (ids.length === 0) {
    throw new ConvertError(`${full}: no test indices`);
  }
  if (new Set(ids).size !== ids.length) {
    throw new ConvertError(`${full}: duplicate test indices`);
  }
  return ids;
}

/** Read all eight files and check the shapes agree with each other. */
export function loadBundle(src: string, name: string): PlanetoidBundle {
  if (!(DATASET_NAMES as readonly string[]).includes(name)) {
    throw new ConvertError(
      `unknown dataset name ${name}; expected one of ${DATASET_NAMES.join(", ")}`);
  }
  const dataset = name as DatasetName;
  const x = expectCSR(readPickled(src, `ind.${name}.x`), `ind.${name}.x`);
  const y = expectLabels(readPickled(src, `ind.${name}.y`), `ind.${name}.y`);
  const tx = expectCSR(readPickled(src, `ind.${name}.tx`), `ind.${name}.tx`);
  const ty = expectLabels(readPickled(src, `ind.${name}.ty`), `ind.${name}.ty`);
  const allx = expectCSR(
    readPickled(src, `ind.${name}.allx`), `ind.${name}.allx`);
  const ally = expectLabels(
    readPickled(src, `ind.${name}.ally`), `ind.${name}.ally`);
  const graph = expectGraph(
    readPickled(src, `ind.${name}.graph`), `ind.${name}.graph`);
  const testIndex = readTestIndex(src, name);

  const fail = (what: string): never => {
    throw new ConvertError(`inconsistent shapes in ${src}: ${what}`);
  };
  if (x.shape[1] !== allx.shape[1] || tx.shape[1] !== allx.shape[1]) {
    fail(`feature widths differ (x ${x.shape[1]}, tx ${tx.shape[1]}, ` +
         `allx ${allx.shape[1]})`);
  }
  if (y.shape[1] !== ally.shape[1] || ty.shape[1] !== ally.shape[1]) {
    fail(`label widths differ (y ${y.shape[1]}, ty ${ty.shape[1]}, ` +
         `ally ${ally.shape[1]})`);
  }
  if (x.shape[0] !== y.shape[0]) {
    fail(`x has ${x.shape[0]} rows but y has ${y.shape[0]}`);
  }
  if (allx.shape[0] !== ally.shape[0]) {
    fail(`allx has ${allx.shape[0]} rows but ally has ${ally.shape[0]}`);
  }
  if (tx.shape[0] !== ty.shape[0]) {
    fail(`tx has ${tx.shape[0]} rows but ty has ${ty.shape[0]}`);
  }
  if (tx.shape[0] !== testIndex.length) {
    fail(`tx has ${tx.shape[0]} rows but test.index lists ` +
         `${testIndex.length} nodes`);
  }
  if (Math.min(...testIndex) !== allx.shape[0]) {
    fail(`smallest test index ${Math.min(...testIndex)} does not continue ` +
         `the allx rows (${allx.shape[0]})`);
  }
  return { name: dataset, x, y, tx, ty, allx, ally, graph, testIndex };
}
