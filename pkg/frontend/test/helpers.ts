/**
 * Deterministic instance corpus plus an independent CLI path.
 *
 * The direct runner writes its own CSV and sidecar rather than reusing the
 * binding's marshaling code, so parity tests cross-check the binding
 * against a second implementation of the file contract.
 */

import { spawnSync } from "node:child_process";
import { mkdtempSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import type { BoundTestRequest, GroupLabel, TestOptions } from "../src/index.js";

export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function gaussian(rng: () => number): number {
  const u = rng() + 1e-12;
  return Math.sqrt(-2 * Math.log(u)) * Math.cos(2 * Math.PI * rng());
}

const MASKS = [
  [true, false, false],
  [true, true, false],
  [true, false, true],
  [true, true, true],
];

/** One deterministic request per index, cycling pattern counts, per-source
 * widths, k, methods, and all three inference modes. */
export function corpusInstance(i: number): BoundTestRequest {
  const rng = mulberry32(7000 + i);
  const nPatterns = 1 + (i % 3);
  const dPer = 1 + (i % 2);
  const boundaries: Array<[number, number]> = [0, 1, 2].map((l) => [
    l * dPer,
    (l + 1) * dPer,
  ]);
  const pool = [...MASKS];
  for (let j = pool.length - 1; j > 0; j--) {
    const swap = Math.floor(rng() * (j + 1));
    [pool[j], pool[swap]] = [pool[swap], pool[j]];
  }
  const masks = pool.slice(0, nPatterns);

  const data: Array<Array<number | null>> = [];
  const groups: GroupLabel[] = [];
  const shift = (i % 5) * 0.3;
  for (const mask of masks) {
    const m = 2 + Math.floor(rng() * 3);
    const n = 2 + Math.floor(rng() * 3);
    for (let r = 0; r < m + n; r++) {
      const isY = r >= m;
      const row: Array<number | null> = [];
      for (let l = 0; l < 3; l++) {
        for (let j = 0; j < dPer; j++) {
          if (!mask[l]) {
            row.push(rng() < 0.5 ? null : NaN);
          } else {
            row.push(gaussian(rng) + (isY ? shift : 0));
          }
        }
      }
      data.push(row);
      groups.push(isY ? "Y" : "X");
    }
  }

  const options: TestOptions = {
    k: 1 + (i % 3),
    method: i % 2 ? "BRISE-v" : "BRISE-c",
  };
  if (i % 3 === 1) {
    options.inference = "pattern-perm";
    options.B = 100 + i;
    options.seed = 1000 + i;
  } else if (i % 3 === 2) {
    options.inference = "standard-perm";
    options.B = 150;
    options.seed = 2000 + i;
  } else {
    options.inference = "asymptotic";
  }
  return { data, groups, sourceBoundaries: boundaries, options };
}

function cliFlags(options: TestOptions): string[] {
  const args: string[] = [];
  if (options.k !== undefined) args.push("--k", String(options.k));
  if (options.method) args.push("--method", options.method);
  if (options.inference) args.push("--inference", options.inference);
  if (options.B !== undefined) args.push("--B", String(options.B));
  if (options.seed !== undefined) args.push("--seed", String(options.seed));
  if (options.nThres !== undefined) args.push("--n-thres", String(options.nThres));
  if (options.pThres !== undefined) args.push("--p-thres", String(options.pThres));
  return args;
}

/** Run `brise <subcommand>` on files written here, parsing stdout JSON. */
export function runCliDirect(
  req: BoundTestRequest,
  subcommand: "test" | "validate" = "test",
): unknown {
  const dir = mkdtempSync(join(tmpdir(), "brise-direct-"));
  try {
    const header = ["group"];
    for (const [start, stop] of req.sourceBoundaries) {
      for (let j = start; j < stop; j++) header.push(`c${j + 1}`);
    }
    const lines = [header.join(",")];
    req.data.forEach((row, r) => {
      const cells = row.map((v) =>
        v === null || Number.isNaN(v as number) ? "" : String(v),
      );
      lines.push([req.groups[r], ...cells].join(","));
    });
    const csvPath = join(dir, "input.csv");
    writeFileSync(csvPath, lines.join("\n") + "\n");

    const schemaPath = join(dir, "input.schema.json");
    const sources = req.sourceBoundaries.map(([start, stop], l) => ({
      name: `s${l + 1}`,
      columns: Array.from({ length: stop - start }, (_, j) => `c${start + j + 1}`),
    }));
    writeFileSync(schemaPath, JSON.stringify({ sources }));

    const opts = req.options ?? {};
    const args = [subcommand, "--data", csvPath, "--schema", schemaPath];
    if (subcommand === "test") {
      args.push(...cliFlags(opts));
    } else {
      args.push(...cliFlags({ nThres: opts.nThres, pThres: opts.pThres }));
    }
    const proc = spawnSync("brise", args, { encoding: "utf8" });
    if (proc.status !== 0) {
      throw new Error(`direct CLI run failed: ${proc.stderr}`);
    }
    return JSON.parse(proc.stdout);
  } finally {
    rmSync(dir, { recursive: true, force: true });
  }
}
