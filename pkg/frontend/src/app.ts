import { ApiRequestError, type SearchApi } from './api.js';
import { ProgressTracker } from './progress.js';
import { renderBanner, renderBars, renderLibraryTotal, renderResults } from './render.js';
import { parseBatch, validateBitstring } from './validate.js';

export interface AppOptions {
  /** Poll cadence for job status. */
  pollIntervalMs?: number;
  /** Consecutive network failures tolerated before the poll gives up. */
  maxPollFailures?: number;
}

const PAGE_HTML = `
  <h1>Molecular Fingerprint Search</h1>
  <div class="banner" data-role="banner" hidden></div>
  <div class="search-box">
    <input type="text" data-role="query" placeholder="166-character fingerprint bitstring" spellcheck="false" />
    <button type="button" data-role="submit">Search</button>
  </div>
  <details class="batch">
    <summary>batch search</summary>
    <textarea data-role="batch" rows="4" placeholder="one bitstring per line"></textarea>
  </details>
  <p class="library-total" data-role="library-total"></p>
  <p class="validation" data-role="validation"></p>
  <div class="bars" data-role="bars"></div>
  <div class="results-area" data-role="results"></div>
`;

/** Page controller: submit, poll with stale-response discard, render results. */
export class App {
  private readonly api: SearchApi;
  private readonly pollIntervalMs: number;
  private readonly maxPollFailures: number;

  private banner!: HTMLElement;
  private queryInput!: HTMLInputElement;
  private batchInput!: HTMLTextAreaElement;
  private submitButton!: HTMLButtonElement;
  private validation!: HTMLElement;
  private barsEl!: HTMLElement;
  private resultsEl!: HTMLElement;

  private timer: ReturnType<typeof setTimeout> | null = null;
  private activeJob: string | null = null;

  constructor(
    private readonly root: HTMLElement,
    api: SearchApi,
    options: AppOptions = {},
  ) {
    this.api = api;
    this.pollIntervalMs = options.pollIntervalMs ?? 500;
    this.maxPollFailures = options.maxPollFailures ?? 5;
  }

  async init(): Promise<void> {
    this.root.innerHTML = PAGE_HTML;
    this.banner = this.root.querySelector('[data-role=banner]')!;
    this.queryInput = this.root.querySelector('[data-role=query]')!;
    this.batchInput = this.root.querySelector('[data-role=batch]')!;
    this.submitButton = this.root.querySelector('[data-role=submit]')!;
    this.validation = this.root.querySelector('[data-role=validation]')!;
    this.barsEl = this.root.querySelector('[data-role=bars]')!;
    this.resultsEl = this.root.querySelector('[data-role=results]')!;

    this.submitButton.addEventListener('click', () => void this.submit());
    this.queryInput.addEventListener('keydown', (event) => {
      if (event.key === 'Enter') {
        void this.submit();
      }
    });

    try {
      const info = await this.api.library();
      renderLibraryTotal(this.root.querySelector('[data-role=library-total]')!, info);
    } catch (error) {
      renderBanner(this.banner, `search service unreachable: ${String(error)}`);
      this.queryInput.disabled = true;
      this.batchInput.disabled = true;
      this.submitButton.disabled = true;
    }
  }

  /** Validate input and submit; malformed bitstrings never leave the page. */
  async submit(): Promise<void> {
    const batchText = this.batchInput.value;
    const single = this.queryInput.value;
    let body;
    if (batchText.trim() !== '') {
      const { queries, error } = parseBatch(batchText);
      if (error !== null) {
        this.validation.textContent = error;
        return;
      }
      body = { batch: queries };
    } else {
      const problem = validateBitstring(single);
      if (problem !== null) {
        this.validation.textContent = problem;
        return;
      }
      body = { query: single.trim() };
    }
    this.validation.textContent = '';
    this.stopPolling();
    this.resultsEl.replaceChildren();
    this.barsEl.replaceChildren();

    try {
      const submitted = await this.api.submit(body);
      renderBanner(this.banner, submitted.warning ? submitted.warning.message : null);
      this.startPolling(submitted.job_id);
    } catch (error) {
      this.validation.textContent =
        error instanceof ApiRequestError ? error.message : `submit failed: ${String(error)}`;
    }
  }

  /** Re-run the search with a fingerprint taken from a result row. */
  resubmit(bitstring: string): void {
    this.batchInput.value = '';
    this.queryInput.value = bitstring;
    void this.submit();
  }

  private startPolling(jobId: string): void {
    const tracker = new ProgressTracker();
    let seq = 0;
    let failures = 0;
    this.activeJob = jobId;

    const schedule = (delay: number): void => {
      this.timer = setTimeout(() => void poll(), delay);
    };

    // one in-flight request at a time: the next poll is scheduled only after
    // the current one settles, with exponential backoff on network errors
    const poll = async (): Promise<void> => {
      if (this.activeJob !== jobId) {
        return;
      }
      const mySeq = seq++;
      try {
        const status = await this.api.status(jobId);
        failures = 0;
        if (this.activeJob !== jobId) {
          return;
        }
        tracker.apply(mySeq, status);
        renderBars(this.barsEl, tracker.shards);
        if (status.state === 'done') {
          this.stopPolling();
          const results = await this.api.results(jobId);
          renderResults(this.resultsEl, results, (bits) => this.resubmit(bits));
          return;
        }
        if (status.state === 'failed' || status.state === 'cancelled') {
          this.stopPolling();
          renderBanner(this.banner, `search ${status.state}${status.error ? `: ${status.error}` : ''}`);
          return;
        }
        schedule(this.pollIntervalMs);
      } catch (error) {
        if (error instanceof ApiRequestError && error.status === 404) {
          this.stopPolling();
          renderBanner(this.banner, 'job expired; submit the search again');
          return;
        }
        failures += 1;
        if (failures > this.maxPollFailures) {
          this.stopPolling();
          renderBanner(this.banner, `lost contact with the search service: ${String(error)}`);
          return;
        }
        schedule(this.pollIntervalMs * 2 ** failures);
      }
    };

    void poll();
  }

  private stopPolling(): void {
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    this.activeJob = null;
  }
}
