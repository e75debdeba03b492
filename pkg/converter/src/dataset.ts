/**
 * Turn a loaded Planetoid bundle into the plain-text dataset directory:
 * put every feature/label row at its graph node id, fill the isolated
 * test-range ids Citeseer leaves behind, derive the fixed split, and write
 * the seven dataset files plus a sha256 manifest with deterministic bytes.
 */

import * as crypto from "node:crypto";
import * as fs from "node:fs";
import * as path from "node:path";
import { ConvertError, PlanetoidBundle, loadBundle } from "./bundle.js";
import { CSRMatrix, NDArray } from "./pickle.js";

export const VALIDATION_SIZE = 500;

/** One feature row as sorted (column, nonzero value) pairs. */
export type SparseRow = Array<[number, number]>;

export interface ConvertedDataset {
  name: string;
  numNodes: number;
  numFeatures: number;
  numClasses: number;
  featureRows: SparseRow[];
  labels: number[];
  /** Undirected edges as u < v pairs, sorted and deduplicated. */
  edges: Array<[number, number]>;
  train: number[];
  val: number[];
  test: number[];
}

export const DATASET_FILES = [
  "features.sparse", "graph.edges", "labels.txt",
  "meta.json", "split.test", "split.train", "split.val",
] as const;

export const MANIFEST_FILE = "manifest.json";

/** Extract row `i` of a CSR matrix as sorted nonzero (col, value) pairs. */
function csrRow(matrix: CSRMatrix, values: number[], indices: number[],
                indptr: number[], i: number): SparseRow {
  const row: SparseRow = [];
  const start = indptr[i]!;
  const end = indptr[i + 1]!;
  for (let k = start; k < end; k++) {
    const col = indices[k]!;
    const value = values[k]!;
    if (col < 0 || col >= matrix.shape[1]) {
      throw new ConvertError(`feature column ${col} out of range ` +
                             `[0, ${matrix.shape[1]})`);
    }
    if (!Number.isFinite(value)) {
      throw new ConvertError(`non-finite feature value in row ${i}`);
    }
    if (value === 0) continue; // stored zeros are not part of the dataset
    row.push([col, value]);
  }
  row.sort((a, b) => a[0] - b[0]);
  for (let k = 1; k < row.length; k++) {
    if (row[k]![0] === row[k - 1]![0]) {
      throw new ConvertError(`duplicate feature column ${row[k]![0]} in row ${i}`);
    }
  }
  return row;
}

function csrRows(matrix: CSRMatrix): SparseRow[] {
  const values = matrix.data.toNumbers();
  const indices = matrix.indices.toNumbers();
  const indptr = matrix.indptr.toNumbers();
  if (indptr.length !== matrix.shape[0] + 1) {
    throw new ConvertError(`CSR indptr has ${indptr.length} entries for ` +
                           `${matrix.shape[0]} rows`);
  }
  const rows: SparseRow[] = [];
  for (let i = 0; i < matrix.shape[0]; i++) {
    rows.push(csrRow(matrix, values, indices, indptr, i));
  }
  return rows;
}

/** One label per row of a one-hot matrix: index of the first maximum. */
function argmaxRows(onehot: NDArray): number[] {
  const [rows, cols] = [onehot.shape[0]!, onehot.shape[1]!];
  const flat = onehot.toNumbers();
  const labels = new Array<number>(rows);
  for (let i = 0; i < rows; i++) {
    let best = 0;
    for (let j = 1; j < cols; j++) {
      if (flat[i * cols + j]! > flat[i * cols + best]!) best = j;
    }
    labels[i] = best;
  }
  return labels;
}

/** Smallest label with the highest frequency. */
function majorityLabel(labels: number[]): number {
  const counts = new Map<number, number>();
  for (const label of labels) {
    counts.set(label, (counts.get(label) ?? 0) + 1);
  }
  let best = -1;
  let bestCount = -1;
  for (const [label, count] of counts) {
    if (count > bestCount || (count === bestCount && label < best)) {
      best = label;
      bestCount = count;
    }
  }
  return best;
}

function buildEdges(graph: Map<number, number[]>,
                    numNodes: number): Array<[number, number]> {
  const seen = new Set<number>();
  const edges: Array<[number, number]> = [];
  for (const [node, neighbors] of graph) {
    if (node < 0 || node >= numNodes) {
      throw new ConvertError(`graph mentions node ${node}, outside ` +
                             `[0, ${numNodes})`);
    }
    for (const other of neighbors) {
      if (other < 0 || other >= numNodes) {
        throw new ConvertError(`graph mentions node ${other}, outside ` +
                               `[0, ${numNodes})`);
      }
      if (other === node) continue; // drop self-loops
      const u = Math.min(node, other);
      const v = Math.max(node, other);
      const key = u * numNodes + v;
      if (seen.has(key)) continue;
      seen.add(key);
      edges.push([u, v]);
    }
  }
  edges.sort((a, b) => a[0] - b[0] || a[1] - b[1]);
  return edges;
}

/**
 * Place every feature/label row at its node id.
 *
 * Node ids [0, nAll) are the allx/ally rows; test.index assigns ids to the
 * tx/ty rows. Ids inside the test range that test.index never mentions
 * (Citeseer has a handful) are isolated placeholders: they get a zero
 * feature row and the majority class label, and belong to no split.
 */
export function assemble(bundle: PlanetoidBundle): ConvertedDataset {
  const numAll = bundle.allx.shape[0];
  const numFeatures = bundle.allx.shape[1];
  const numClasses = bundle.ally.shape[1]!;
  const minTest = Math.min(...bundle.testIndex);
  const maxTest = Math.max(...bundle.testIndex);
  const numNodes = numAll + (maxTest - minTest + 1);

  const allRows = csrRows(bundle.allx);
  const testRows = csrRows(bundle.tx);
  const allLabels = argmaxRows(bundle.ally);
  const testLabels = argmaxRows(bundle.ty);
  const fill = majorityLabel(allLabels.concat(testLabels));

  const featureRows: SparseRow[] = new Array(numNodes);
  const labels = new Array<number>(numNodes).fill(fill);
  for (let i = 0; i < numAll; i++) {
    featureRows[i] = allRows[i]!;
    labels[i] = allLabels[i]!;
  }
  for (let i = numAll; i < numNodes; i++) {
    featureRows[i] = []; // overwritten below unless the id is a gap
  }
  for (let k = 0; k < bundle.testIndex.length; k++) {
    const node = bundle.testIndex[k]!;
    featureRows[node] = testRows[k]!;
    labels[node] = testLabels[k]!;
  }

  const numTrain = bundle.y.shape[0]!;
  if (numTrain + VALIDATION_SIZE > numAll) {
    throw new ConvertError(
      `not enough non-test nodes for the ${VALIDATION_SIZE}-node validation ` +
      `split: need ${numTrain + VALIDATION_SIZE}, have ${numAll}`);
  }
  const train = range(0, numTrain);
  const val = range(numTrain, numTrain + VALIDATION_SIZE);
  const test = [...bundle.testIndex].sort((a, b) => a - b);

  return {
    name: bundle.name,
    numNodes, numFeatures, numClasses,
    featureRows, labels,
    edges: buildEdges(bundle.graph, numNodes),
    train, val, test,
  };
}

function range(start: number, stop: number): number[] {
  const out = new Array<number>(stop - start);
  for (let i = start; i < stop; i++) out[i - start] = i;
  return out;
}

/** Render the seven dataset files as strings, keyed by file name. */
export function renderFiles(ds: ConvertedDataset): Map<string, string> {
  const meta = `{"name":${JSON.stringify(ds.name)}` +
    `,"num_classes":${ds.numClasses}` +
    `,"num_features":${ds.numFeatures}` +
    `,"num_nodes":${ds.numNodes}}\n`;
  const edges = ds.edges.map(([u, v]) => `${u} ${v}\n`).join("");
  const features = ds.featureRows
    .map((row) => row.map(([c, v]) => `${c}:${v}`).join(" ") + "\n")
    .join("");
  const labels = ds.labels.map((l) => `${l}\n`).join("");
  const split = (ids: number[]) => ids.map((v) => `${v}\n`).join("");
  return new Map([
    ["meta.json", meta],
    ["graph.edges", edges],
    ["features.sparse", features],
    ["labels.txt", labels],
    ["split.train", split(ds.train)],
    ["split.val", split(ds.val)],
    ["split.test", split(ds.test)],
  ]);
}

export function sha256(content: string | Buffer): string {
  return crypto.createHash("sha256").update(content).digest("hex");
}

/** Load, assemble, and write in one step; returns the assembled dataset. */
export function convert(srcDir: string, name: string,
                        outDir: string): ConvertedDataset {
  const ds = assemble(loadBundle(srcDir, name));
  writeDataset(outDir, ds);
  return ds;
}

/** Write the dataset files plus a manifest listing their sha256 digests. */
export function writeDataset(outDir: string, ds: ConvertedDataset): void {
  fs.mkdirSync(outDir, { recursive: true });
  const files = renderFiles(ds);
  const digests: string[] = [];
  for (const name of DATASET_FILES) {
    const content = files.get(name)!;
    fs.writeFileSync(path.join(outDir, name), content);
    digests.push(`${JSON.stringify(name)}:"${sha256(content)}"`);
  }
  const manifest =
    `{"algorithm":"sha256","files":{${digests.join(",")}}}\n`;
  fs.writeFileSync(path.join(outDir, MANIFEST_FILE), manifest);
}
