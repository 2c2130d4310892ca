import type { JobState, JobStatus } from './types.js';

/** Fixed palette: datasets A, B, C get the first three; further labels cycle. */
export const BAR_COLORS = ['#2563eb', '#16a34a', '#ea580c', '#9333ea', '#0e7490', '#be123c'];

/** Deterministic color per dataset label (A..Z, then A1..Z1, ...). */
export function colorForLabel(label: string): string {
  const letter = label.charCodeAt(0) - 65; // 'A'
  const cycle = label.length > 1 ? Number(label.slice(1)) : 0;
  const ordinal = Number.isFinite(letter) && letter >= 0 && letter < 26 && !Number.isNaN(cycle)
    ? cycle * 26 + letter
    : [...label].reduce((h, c) => (h * 31 + c.charCodeAt(0)) >>> 0, 0);
  return BAR_COLORS[ordinal % BAR_COLORS.length]!;
}

export interface ShardBar {
  label: string;
  done: number;
  total: number;
  fraction: number;
  color: string;
}

/**
 * Accumulates poll responses into render-ready bars.
 *
 * Responses may arrive out of order; each poll carries a sequence number and
 * anything older than the newest applied response is discarded. Per-shard
 * counters are additionally clamped to be non-decreasing, so bars can never
 * move backward no matter what arrives.
 */
export class ProgressTracker {
  private lastSeq = -1;
  private order: string[] = [];
  private bars = new Map<string, ShardBar>();
  private jobState: JobState | null = null;
  private maxFraction = 0;

  /** Apply one poll response; returns false if it was stale and ignored. */
  apply(seq: number, status: JobStatus): boolean {
    if (seq <= this.lastSeq) {
      return false;
    }
    this.lastSeq = seq;
    this.jobState = status.state;
    for (const shard of status.shards) {
      const existing = this.bars.get(shard.label);
      if (existing === undefined) {
        this.order.push(shard.label);
        this.bars.set(shard.label, {
          label: shard.label,
          done: shard.done,
          total: shard.total,
          fraction: shard.total > 0 ? shard.done / shard.total : 1,
          color: colorForLabel(shard.label),
        });
      } else {
        const done = Math.max(existing.done, shard.done);
        existing.done = done;
        existing.total = shard.total;
        existing.fraction = shard.total > 0 ? done / shard.total : 1;
      }
    }
    this.maxFraction = Math.max(this.maxFraction, status.progress);
    return true;
  }

  get shards(): ShardBar[] {
    return this.order.map((label) => this.bars.get(label)!);
  }

  get state(): JobState | null {
    return this.jobState;
  }

  /** Aggregate fraction, clamped monotone. */
  get fraction(): number {
    return this.maxFraction;
  }
}
