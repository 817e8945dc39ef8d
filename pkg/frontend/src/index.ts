/**
 * Run two-sample tests on in-memory arrays by delegating to the `brise`
 * CLI.
 *
 * The binding holds no statistics of its own: it validates the request
 * shape the same way the engine's array path does, writes the matrix as
 * the CLI's CSV plus schema sidecar, invokes the executable, and parses
 * the JSON back. Numbers survive the round trip exactly because both
 * sides print and parse shortest round-trip decimal forms.
 *
 * Override the executable with the BRISE_BIN environment variable.
 */

import { spawnSync } from "node:child_process";
import { mkdtempSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import {
  BriseError,
  InvalidConfigError,
  IoError,
  NonNumericValueError,
  SchemaMismatchError,
  errorFromCode,
} from "./errors.js";

export * from "./errors.js";

export type GroupLabel = "X" | "Y";

export interface TestOptions {
  /** Neighbor count for the rank graph (CLI default 10). */
  k?: number;
  method?: "BRISE-c" | "BRISE-v";
  inference?: "asymptotic" | "pattern-perm" | "standard-perm";
  /** Permutation replicates, only read by the permutation modes. */
  B?: number;
  seed?: number;
  /** Drop patterns with fewer rows than this in either group. */
  nThres?: number;
  /** Drop patterns smaller than this fraction of the data. */
  pThres?: number;
}

export type ValidateOptions = Pick<TestOptions, "nThres" | "pThres">;

export interface BoundTestRequest {
  /** N x d matrix; missing entries are NaN or null, block-wise per source. */
  data: ReadonlyArray<ReadonlyArray<number | null>>;
  groups: ReadonlyArray<GroupLabel>;
  /** Half-open column ranges, in order, tiling all d columns. */
  sourceBoundaries: ReadonlyArray<readonly [number, number]>;
  options?: TestOptions;
}

export interface PatternCounts {
  mask: number[];
  m: number;
  n: number;
}

export interface TestResult {
  method: string;
  statistic: number;
  df: number;
  p_value: number;
  inference: string;
  k: number;
  n_patterns: number;
  pattern_counts: PatternCounts[];
  dropped_components: string[];
  warnings: string[];
}

export interface ValidationReport {
  n_patterns_raw: number;
  n_patterns: number;
  patterns: PatternCounts[];
  valid_pairs: number[][];
  dropped_rows: number[];
}

const OPTION_FLAGS: Record<keyof TestOptions, string> = {
  k: "--k",
  method: "--method",
  inference: "--inference",
  B: "--B",
  seed: "--seed",
  nThres: "--n-thres",
  pThres: "--p-thres",
};

function checkRequest(req: BoundTestRequest, allowed: Set<string>): void {
  const { data, groups, sourceBoundaries } = req;
  if (!Array.isArray(data) || data.length < 1) {
    throw new SchemaMismatchError("data must be a non-empty 2-D matrix");
  }
  const d = data[0]?.length ?? 0;
  if (d < 1) {
    throw new SchemaMismatchError("data must be a non-empty 2-D matrix");
  }
  data.forEach((row, i) => {
    if (!Array.isArray(row) || row.length !== d) {
      throw new SchemaMismatchError("data must be a non-empty 2-D matrix");
    }
    row.forEach((v, j) => {
      if (v === null || Number.isNaN(v)) return;
      if (typeof v !== "number" || !Number.isFinite(v)) {
        throw new NonNumericValueError(`row ${i}, column ${j}: non-finite value`);
      }
    });
  });

  let cursor = 0;
  for (const bound of sourceBoundaries) {
    const [start, stop] = bound;
    if (
      !Number.isInteger(start) ||
      !Number.isInteger(stop) ||
      start !== cursor ||
      stop <= start
    ) {
      throw new SchemaMismatchError(
        `source boundaries must tile the columns in order; got (${start}, ${stop}) at offset ${cursor}`,
      );
    }
    cursor = stop;
  }
  if (cursor !== d) {
    throw new SchemaMismatchError(
      `source boundaries cover ${cursor} columns but the matrix has ${d}`,
    );
  }

  if (!Array.isArray(groups) || groups.length !== data.length) {
    throw new SchemaMismatchError("groups must have one label per row");
  }
  groups.forEach((label, i) => {
    if (label !== "X" && label !== "Y") {
      throw new NonNumericValueError(
        `row ${i}: group label must be 'X' or 'Y', got ${JSON.stringify(label)}`,
      );
    }
  });

  for (const key of Object.keys(req.options ?? {})) {
    if (!allowed.has(key)) {
      throw new InvalidConfigError(`unknown option ${JSON.stringify(key)}`);
    }
  }
}

function writeInstance(dir: string, req: BoundTestRequest) {
  const columns = req.sourceBoundaries.map(([start, stop]) =>
    Array.from({ length: stop - start }, (_, j) => `c${start + j + 1}`),
  );
  const header = ["group", ...columns.flat()];
  const lines = [header.join(",")];
  req.data.forEach((row, i) => {
    const cells = row.map((v) =>
      v === null || Number.isNaN(v) ? "" : String(v),
    );
    lines.push([req.groups[i], ...cells].join(","));
  });
  const csvPath = join(dir, "data.csv");
  writeFileSync(csvPath, lines.join("\n") + "\n");

  const sources = columns.map((cols, l) => ({ name: `s${l + 1}`, columns: cols }));
  const schemaPath = join(dir, "schema.json");
  writeFileSync(schemaPath, JSON.stringify({ sources }));
  return { csvPath, schemaPath };
}

function optionArgs(options: TestOptions): string[] {
  const args: string[] = [];
  for (const [key, flag] of Object.entries(OPTION_FLAGS)) {
    const value = options[key as keyof TestOptions];
    if (value !== undefined) {
      args.push(flag, String(value));
    }
  }
  return args;
}

function runCli(args: string[]): string {
  const exe = process.env.BRISE_BIN ?? "brise";
  const proc = spawnSync(exe, args, { encoding: "utf8", maxBuffer: 1 << 26 });
  if (proc.error) {
    throw new IoError(`cannot launch ${JSON.stringify(exe)}: ${proc.error.message}`);
  }
  if (proc.status !== 0) {
    const text = (proc.stderr ?? "").trim();
    const lastLine = text.split("\n").pop() ?? "";
    try {
      const payload = JSON.parse(lastLine) as {
        error: { code: string; message: string };
      };
      throw errorFromCode(payload.error.code, payload.error.message);
    } catch (err) {
      if (err instanceof BriseError) throw err;
      throw new BriseError(`${exe} exited with status ${proc.status}: ${text}`);
    }
  }
  return proc.stdout;
}

function withInstance<T>(
  req: BoundTestRequest,
  allowed: Set<string>,
  run: (csvPath: string, schemaPath: string) => T,
): T {
  checkRequest(req, allowed);
  const dir = mkdtempSync(join(tmpdir(), "brise-"));
  try {
    const { csvPath, schemaPath } = writeInstance(dir, req);
    return run(csvPath, schemaPath);
  } finally {
    rmSync(dir, { recursive: true, force: true });
  }
}

/** Run one two-sample test; the result mirrors the CLI's JSON exactly. */
export function runTest(request: BoundTestRequest): TestResult {
  return withInstance(
    request,
    new Set(Object.keys(OPTION_FLAGS)),
    (csvPath, schemaPath) => {
      const args = [
        "test",
        "--data",
        csvPath,
        "--schema",
        schemaPath,
        ...optionArgs(request.options ?? {}),
      ];
      return JSON.parse(runCli(args)) as TestResult;
    },
  );
}

/** Ingest and partition only: pattern counts, valid pairs, dropped rows. */
export function validate(
  request: Omit<BoundTestRequest, "options"> & { options?: ValidateOptions },
): ValidationReport {
  return withInstance(
    request,
    new Set(["nThres", "pThres"]),
    (csvPath, schemaPath) => {
      const args = [
        "validate",
        "--data",
        csvPath,
        "--schema",
        schemaPath,
        ...optionArgs(request.options ?? {}),
      ];
      return JSON.parse(runCli(args)) as ValidationReport;
    },
  );
}
