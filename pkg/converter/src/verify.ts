/**
 * Independent check of an already-converted directory against the upstream
 * distribution it came from: re-derive the expected counts and bytes from
 * the source files and compare with what sits on disk, including the sha256
 * manifest. Returns one message per mismatch; an empty list means the
 * output is exactly what a fresh conversion would produce.
 */

import * as fs from "node:fs";
import * as path from "node:path";
import { ConvertError, loadBundle } from "./bundle.js";
import {
  DATASET_FILES, MANIFEST_FILE, assemble, renderFiles, sha256,
} from "./dataset.js";

interface Manifest {
  algorithm: string;
  files: Record<string, string>;
}

function readManifest(outDir: string): Manifest {
  const full = path.join(outDir, MANIFEST_FILE);
  let text: string;
  try {
    text = fs.readFileSync(full, "utf-8");
  } catch {
    throw new ConvertError(`missing manifest: ${full}`);
  }
  let parsed: unknown;
  try {
    parsed = JSON.parse(text);
  } catch (err) {
    throw new ConvertError(`${full}: invalid JSON (${(err as Error).message})`);
  }
  const manifest = parsed as Manifest;
  if (manifest.algorithm !== "sha256" || typeof manifest.files !== "object") {
    throw new ConvertError(`${full}: not a sha256 file manifest`);
  }
  return manifest;
}

/**
 * Compare the converted directory at `outDir` against the upstream files
 * in `srcDir`. Throws ConvertError when the manifest (or the upstream
 * source) is unusable; otherwise returns the list of mismatches.
 */
export function verifyOutput(srcDir: string, name: string,
                             outDir: string): string[] {
  const expected = assemble(loadBundle(srcDir, name));
  const files = renderFiles(expected);
  const manifest = readManifest(outDir);
  const mismatches: string[] = [];

  for (const file of DATASET_FILES) {
    const want = files.get(file)!;
    let actual: string;
    try {
      actual = fs.readFileSync(path.join(outDir, file), "utf-8");
    } catch {
      mismatches.push(`${file}: missing from ${outDir}`);
      continue;
    }
    const listed = manifest.files[file];
    if (listed === undefined) {
      mismatches.push(`${file}: not listed in the manifest`);
    } else if (listed !== sha256(actual)) {
      mismatches.push(`${file}: sha256 differs from the manifest`);
    }
    if (actual !== want) {
      mismatches.push(`${file}: content differs from a fresh conversion`);
    }
  }
  for (const file of Object.keys(manifest.files)) {
    if (!(DATASET_FILES as readonly string[]).includes(file)) {
      mismatches.push(`${file}: listed in the manifest but not a dataset file`);
    }
  }

  const meta = {
    num_nodes: expected.numNodes,
    num_features: expected.numFeatures,
    num_classes: expected.numClasses,
  };
  let metaActual: Record<string, unknown> | null = null;
  try {
    metaActual = JSON.parse(
      fs.readFileSync(path.join(outDir, "meta.json"), "utf-8"),
    ) as Record<string, unknown>;
  } catch {
    metaActual = null; // already reported above as missing/differing
  }
  if (metaActual !== null) {
    if (metaActual["name"] !== expected.name) {
      mismatches.push(`meta.json: name is ${JSON.stringify(metaActual["name"])}, ` +
                      `expected ${JSON.stringify(expected.name)}`);
    }
    for (const [key, want] of Object.entries(meta)) {
      if (Number(metaActual[key]) !== want) {
        mismatches.push(`meta.json: ${key} is ${metaActual[key]}, expected ${want}`);
      }
    }
  }

  const countLines = (file: string): number | null => {
    try {
      const text = fs.readFileSync(path.join(outDir, file), "utf-8");
      return text === "" ? 0 : text.replace(/\n$/, "").split("\n").length;
    } catch {
      return null;
    }
  };
  const expectedSizes: Array<[string, number]> = [
    ["split.train", expected.train.length],
    ["split.val", expected.val.length],
    ["split.test", expected.test.length],
    ["graph.edges", expected.edges.length],
  ];
  for (const [file, want] of expectedSizes) {
    const got = countLines(file);
    if (got !== null && got !== want) {
      mismatches.push(`${file}: ${got} lines, expected ${want}`);
    }
  }
  return mismatches;
}
