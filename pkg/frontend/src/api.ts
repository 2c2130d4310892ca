import type {
  ApiErrorBody,
  JobResults,
  JobStatus,
  LibraryInfo,
  SubmitResponse,
} from './types.js';

export class ApiRequestError extends Error {
  constructor(
    readonly status: number,
    readonly body: ApiErrorBody | null,
  ) {
    super(body?.message ?? `request failed with status ${status}`);
    this.name = 'ApiRequestError';
  }

  get code(): string {
    return this.body?.code ?? 'internal';
  }
}

export interface SubmitBody {
  query?: string;
  query_kind?: 'bitstring' | 'molfile';
  batch?: string[];
  n?: number;
}

/** What the page needs from the backend; tests substitute a mock. */
export interface SearchApi {
  library(): Promise<LibraryInfo>;
  submit(body: SubmitBody): Promise<SubmitResponse>;
  status(jobId: string): Promise<JobStatus>;
  results(jobId: string): Promise<JobResults>;
  cancel(jobId: string): Promise<{ state: string }>;
}

/** Thin typed client; all rendered numbers come from these payloads verbatim. */
export class ApiClient implements SearchApi {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: typeof fetch = globalThis.fetch.bind(globalThis),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      let body: ApiErrorBody | null = null;
      try {
        body = (await response.json()) as ApiErrorBody;
      } catch {
        body = null;
      }
      throw new ApiRequestError(response.status, body);
    }
    return (await response.json()) as T;
  }

  library(): Promise<LibraryInfo> {
    return this.request<LibraryInfo>('/api/v1/library');
  }

  submit(body: SubmitBody): Promise<SubmitResponse> {
    return this.request<SubmitResponse>('/api/v1/search', {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(body),
    });
  }

  status(jobId: string): Promise<JobStatus> {
    return this.request<JobStatus>(`/api/v1/jobs/${jobId}`);
  }

  results(jobId: string): Promise<JobResults> {
    return this.request<JobResults>(`/api/v1/jobs/${jobId}/results`);
  }

  cancel(jobId: string): Promise<{ state: string }> {
    return this.request<{ state: string }>(`/api/v1/jobs/${jobId}`, { method: 'DELETE' });
  }
}
