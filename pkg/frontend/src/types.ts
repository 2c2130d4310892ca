/** Payload shapes of the search API (v1). */

export type JobState = 'queued' | 'running' | 'done' | 'failed' | 'cancelled';

export interface LibraryInfo {
  total_records: number;
  shards: { label: string; record_count: number }[];
  format_version: number;
}

export interface ShardStatus {
  label: string;
  done: number;
  total: number;
}

export interface JobStatus {
  state: JobState;
  progress: number;
  shards: ShardStatus[];
  timestamps: {
    submitted_at: string | null;
    started_at: string | null;
    finished_at: string | null;
  };
  error?: string;
}

export interface SearchHit {
  cid: number;
  distance: number;
  /** Optional canonical bitstring; when present the row can be re-submitted as a query. */
  fingerprint?: string;
}

export interface JobResults {
  hits: SearchHit[];
  n: number;
  elapsed_ms: number | null;
}

export interface SubmitResponse {
  job_id: string;
  warning?: { message: string; unsupported_keys: number[] };
}

export interface ApiErrorBody {
  code: string;
  message: string;
  detail?: Record<string, unknown>;
}
