#!/usr/bin/env node
/**
 * Command-line wrapper: convert one upstream Planetoid distribution into a
 * plain-text dataset directory, optionally re-checking the written output
 * against the source afterwards.
 */

import { DATASET_NAMES, ConvertError } from "./bundle.js";
import { convert } from "./dataset.js";
import { PickleError } from "./pickle.js";
import { validateDirectory } from "./validate.js";
import { verifyOutput } from "./verify.js";

const USAGE =
  "usage: planetoid-convert --src DIR --name {cora,citeseer,pubmed} " +
  "--out DIR [--verify]";

interface Args {
  src: string;
  name: string;
  out: string;
  verify: boolean;
}

function parseArgs(argv: string[]): Args {
  let src: string | undefined;
  let name: string | undefined;
  let out: string | undefined;
  let verify = false;
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i]!;
    const next = (): string => {
      const value = argv[++i];
      if (value === undefined) fail(`${arg} needs a value`);
      return value;
    };
    switch (arg) {
      case "--src": src = next(); break;
      case "--name": name = next(); break;
      case "--out": out = next(); break;
      case "--verify": verify = true; break;
      case "--help": case "-h":
        console.log(USAGE);
        process.exit(0);
        break;
      default:
        fail(`unknown argument ${arg}`);
    }
  }
  if (src === undefined || name === undefined || out === undefined) {
    fail("--src, --name, and --out are all required");
  }
  return { src: src!, name: name!, out: out!, verify };
}

function fail(message: string): never {
  console.error(`planetoid-convert: ${message}`);
  console.error(USAGE);
  process.exit(1);
}

export function main(argv: string[]): void {
  const args = parseArgs(argv);
  if (!(DATASET_NAMES as readonly string[]).includes(args.name)) {
    fail(`unknown dataset name ${args.name}; ` +
         `expected one of ${DATASET_NAMES.join(", ")}`);
  }
  try {
    const ds = convert(args.src, args.name, args.out);
    console.log(
      `wrote ${args.out}: ${ds.numNodes} nodes, ${ds.edges.length} edges, ` +
      `${ds.numFeatures} features, ${ds.numClasses} classes, ` +
      `splits ${ds.train.length}/${ds.val.length}/${ds.test.length}`);
    if (args.verify) {
      const problems = [
        ...verifyOutput(args.src, args.name, args.out),
        ...validateDirectory(args.out),
      ];
      if (problems.length > 0) {
        for (const problem of problems) console.error(`verify: ${problem}`);
        process.exit(1);
      }
      console.log("verify: ok");
    }
  } catch (err) {
    if (err instanceof ConvertError || err instanceof PickleError) {
      console.error(`planetoid-convert: ${err.message}`);
      process.exit(1);
    }
    throw err;
  }
}

main(process.argv.slice(2));
