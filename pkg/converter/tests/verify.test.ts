import * as crypto from "node:crypto";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { fileURLToPath } from "node:url";
import { afterAll, beforeEach, describe, expect, it } from "vitest";
import { ConvertError } from "../src/bundle.js";
import { MANIFEST_FILE, convert } from "../src/dataset.js";
import { verifyOutput } from "../src/verify.js";

const FIXTURES = path.join(
  path.dirname(fileURLToPath(import.meta.url)), "fixtures");
const SRC = path.join(FIXTURES, "modern", "cora");

const tmpRoot = fs.mkdtempSync(path.join(os.tmpdir(), "planetoid-verify-"));
afterAll(() => fs.rmSync(tmpRoot, { recursive: true, force: true }));

const out = path.join(tmpRoot, "cora");
beforeEach(() => {
  fs.rmSync(out, { recursive: true, force: true });
  convert(SRC, "cora", out);
});

describe("verifyOutput", () => {
  it("returns no mismatches for a fresh conversion", () => {
    expect(verifyOutput(SRC, "cora", out)).toEqual([]);
  });

  it("names a tampered labels file", () => {
    const file = path.join(out, "labels.txt");
    const lines = fs.readFileSync(file, "utf-8").split("\n");
    lines[0] = lines[0] === "0" ? "1" : "0";
    fs.writeFileSync(file, lines.join("\n"));
    const mismatches = verifyOutput(SRC, "cora", out);
    expect(mismatches.length).toBeGreaterThan(0);
    expect(mismatches.every((m) => m.startsWith("labels.txt"))).toBe(true);
    expect(mismatches.join("\n")).toMatch(/sha256 differs/);
    expect(mismatches.join("\n")).toMatch(/differs from a fresh conversion/);
  });

  it("catches tampering even when the manifest is refreshed", () => {
    // rewriting the manifest hash hides nothing: content is re-derived
    const file = path.join(out, "meta.json");
    const meta = JSON.parse(fs.readFileSync(file, "utf-8")) as
      Record<string, unknown>;
    meta["num_nodes"] = Number(meta["num_nodes"]) + 1;
    const text = JSON.stringify(meta) + "\n";
    fs.writeFileSync(file, text);
    const manifestFile = path.join(out, MANIFEST_FILE);
    const manifest = JSON.parse(fs.readFileSync(manifestFile, "utf-8")) as {
      algorithm: string; files: Record<string, string>;
    };
    manifest.files["meta.json"] =
      crypto.createHash("sha256").update(text).digest("hex");
    fs.writeFileSync(manifestFile, JSON.stringify(manifest) + "\n");

    const mismatches = verifyOutput(SRC, "cora", out);
    expect(mismatches.join("\n")).toMatch(/meta\.json.*num_nodes/);
    expect(mismatches.join("\n")).toMatch(/differs from a fresh conversion/);
  });

  it("reports a missing dataset file", () => {
    fs.rmSync(path.join(out, "split.val"));
    const mismatches = verifyOutput(SRC, "cora", out);
    expect(mismatches.some((m) => m.startsWith("split.val"))).toBe(true);
  });

  it("errors out when the manifest is missing", () => {
    fs.rmSync(path.join(out, MANIFEST_FILE));
    expect(() => verifyOutput(SRC, "cora", out)).toThrow(ConvertError);
    expect(() => verifyOutput(SRC, "cora", out)).toThrow(/missing manifest/);
  });

  it("flags files the manifest lists but the format does not", () => {
    const manifestFile = path.join(out, MANIFEST_FILE);
    const manifest = JSON.parse(fs.readFileSync(manifestFile, "utf-8")) as {
      algorithm: string; files: Record<string, string>;
    };
    manifest.files["extra.bin"] = "0".repeat(64);
    fs.writeFileSync(manifestFile, JSON.stringify(manifest) + "\n");
    const mismatches = verifyOutput(SRC, "cora", out);
    expect(mismatches.some((m) => m.startsWith("extra.bin"))).toBe(true);
  });
});
