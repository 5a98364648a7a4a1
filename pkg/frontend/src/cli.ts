#!/usr/bin/env node
/**
 * CLI wrapper: `render --curves a.csv b.csv c.csv --labels "empirical" "chi2"
 * "cone" --out fig.svg [--title ...]`.
 *
 * Exits 0 on success, 1 on usage errors, 2 when an input fails to parse
 * (the message names the file and line).
 */

import { CsvError } from "./csv.js";
import { FigureSpec, render } from "./figure.js";

const USAGE =
  "usage: render --curves <csv> [<csv> ...] --labels <label> [<label> ...] --out <file.svg> [--title <text>]";

export function parseArgs(argv: string[]): FigureSpec {
  if (argv[0] !== "render") {
    throw new Error(`unknown command '${argv[0] ?? ""}'; ${USAGE}`);
  }
  const spec: { curves: string[]; labels: string[]; out?: string; title?: string } = {
    curves: [],
    labels: [],
  };
  let current: "curves" | "labels" | null = null;
  for (let index = 1; index < argv.length; index++) {
    const arg = argv[index];
    if (arg === "--curves") {
      current = "curves";
    } else if (arg === "--labels") {
      current = "labels";
    } else if (arg === "--out") {
      current = null;
      spec.out = argv[++index];
    } else if (arg === "--title") {
      current = null;
      spec.title = argv[++index];
    } else if (arg.startsWith("--")) {
      throw new Error(`unknown option '${arg}'; ${USAGE}`);
    } else if (current !== null) {
      spec[current].push(arg);
    } else {
      throw new Error(`unexpected argument '${arg}'; ${USAGE}`);
    }
  }
  if (spec.curves.length === 0) throw new Error(`missing --curves; ${USAGE}`);
  if (spec.out === undefined) throw new Error(`missing --out; ${USAGE}`);
  if (spec.labels.length === 0) {
    spec.labels = spec.curves.map((_, i) => `curve ${i + 1}`);
  }
  return { curves: spec.curves, labels: spec.labels, out: spec.out, title: spec.title };
}

export function main(argv: string[]): number {
  let spec: FigureSpec;
  try {
    spec = parseArgs(argv);
  } catch (err) {
    console.error((err as Error).message);
    return 1;
  }
  try {
    render(spec);
  } catch (err) {
    if (err instanceof CsvError) {
      console.error(`parse error: ${err.message}`);
      return 2;
    }
    console.error((err as Error).message);
    return 1;
  }
  console.log(`wrote ${spec.out}`);
  return 0;
}

const invokedDirectly =
  process.argv[1] !== undefined && import.meta.url.endsWith(process.argv[1].split("/").pop()!);
if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)));
}
