/**
 * Spawns the real annotation service (plus a small synthetic dataset) for
 * the live tests.  Requires the Python package to be installed.
 */

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

const PYTHON = process.env.PYTHON ?? "python3";

export interface LiveService {
  baseUrl: string;
  /** Ground-truth count per image id, from the generated manifest. */
  counts: Map<string, number>;
  ids: string[];
  stop(): Promise<void>;
}

export type Verdict = -1 | 0 | 1;

/** The truthful answer for a proposed pair. */
export function verdictFor(counts: Map<string, number>, i: string, j: string): Verdict {
  const ci = counts.get(i);
  const cj = counts.get(j);
  if (ci === undefined || cj === undefined) throw new Error(`unknown ids ${i}, ${j}`);
  if (ci === cj) return 0;
  return ci > cj ? 1 : -1;
}

/** Ids sorted by descending ground-truth count, duplicates-free counts only. */
export function distinctByCount(service: LiveService, k: number): string[] {
  const seen = new Set<number>();
  const picked: string[] = [];
  const byCount = [...service.counts.entries()].sort((a, b) => b[1] - a[1]);
  for (const [id, count] of byCount) {
    if (seen.has(count)) continue;
    seen.add(count);
    picked.push(id);
    if (picked.length === k) return picked;
  }
  throw new Error(`only ${picked.length} distinct counts available, need ${k}`);
}

function parseManifest(path: string): Map<string, number> {
  const counts = new Map<string, number>();
  const lines = readFileSync(path, "utf8").trim().split("\n");
  for (const line of lines.slice(1)) {
    const [id, , count] = line.split(",");
    counts.set(id, Number(count));
  }
  return counts;
}

async function waitUntilUp(baseUrl: string, proc: ChildProcess, stderr: () => string): Promise<void> {
  for (let attempt = 0; attempt < 150; attempt += 1) {
    if (proc.exitCode !== null) {
      throw new Error(`service exited with code ${proc.exitCode}:\n${stderr()}`);
    }
    try {
      const resp = await fetch(`${baseUrl}/pool`);
      if (resp.ok) return;
    } catch {
      // not listening yet
    }
    await new Promise((resolve) => setTimeout(resolve, 200));
  }
  throw new Error(`service did not come up at ${baseUrl}:\n${stderr()}`);
}

export async function startService(opts: { n?: number; cap?: number; seed?: number } = {}): Promise<LiveService> {
  const dir = mkdtempSync(join(tmpdir(), "annotate-ui-"));
  const synth = spawnSync(
    PYTHON,
    [
      "-m", "rankcount.cli", "synth",
      "--out", dir,
      "--n", String(opts.n ?? 12),
      "--count-min", "5",
      "--count-max", "400",
      "--width", "24",
      "--height", "24",
      "--seed", "11",
    ],
    { encoding: "utf8" },
  );
  if (synth.status !== 0) {
    throw new Error(`synth failed (${synth.status}): ${synth.stderr}`);
  }
  const manifest = join(dir, "manifest.csv");
  const counts = parseManifest(manifest);

  const port = 20000 + Math.floor(Math.random() * 20000);
  const baseUrl = `http://127.0.0.1:${port}`;
  const proc = spawn(
    PYTHON,
    [
      "-m", "rankcount.cli", "serve",
      "--manifest", manifest,
      "--host", "127.0.0.1",
      "--port", String(port),
      "--cap", String(opts.cap ?? 100000),
      "--seed", String(opts.seed ?? 7),
    ],
    { stdio: ["ignore", "ignore", "pipe"] },
  );
  let stderr = "";
  proc.stderr?.on("data", (chunk: Buffer) => {
    stderr += chunk.toString();
  });
  const exited = new Promise<void>((resolve) => {
    proc.on("exit", () => resolve());
  });

  await waitUntilUp(baseUrl, proc, () => stderr);

  return {
    baseUrl,
    counts,
    ids: [...counts.keys()].sort(),
    async stop() {
      proc.kill("SIGTERM");
      const timeout = new Promise<void>((resolve) => setTimeout(resolve, 5000));
      await Promise.race([exited, timeout]);
      if (proc.exitCode === null) proc.kill("SIGKILL");
      rmSync(dir, { recursive: true, force: true });
    },
  };
}
