import type { ShardBar } from './progress.js';
import type { JobResults, LibraryInfo } from './types.js';

export const MAX_RESULT_ROWS = 30;

export function pubchemUrl(cid: number): string {
  return `https://pubchem.ncbi.nlm.nih.gov/compound/${cid}`;
}

export function renderLibraryTotal(el: HTMLElement, info: LibraryInfo): void {
  el.textContent = `${info.total_records.toLocaleString('en-US')} molecules in ${
    info.shards.length
  } dataset${info.shards.length === 1 ? '' : 's'}`;
}

export function renderBars(el: HTMLElement, bars: ShardBar[]): void {
  el.replaceChildren();
  for (const bar of bars) {
    const row = document.createElement('div');
    row.className = 'bar-row';
    row.dataset['label'] = bar.label;

    const label = document.createElement('span');
    label.className = 'bar-label';
    label.textContent = `dataset ${bar.label}`;

    const track = document.createElement('div');
    track.className = 'bar-track';
    const fill = document.createElement('div');
    fill.className = 'bar-fill';
    fill.style.width = `${(bar.fraction * 100).toFixed(1)}%`;
    fill.style.backgroundColor = bar.color;
    track.appendChild(fill);

    const counter = document.createElement('span');
    counter.className = 'bar-counter';
    counter.textContent = `${bar.done.toLocaleString('en-US')} / ${bar.total.toLocaleString('en-US')}`;

    row.append(label, track, counter);
    el.appendChild(row);
  }
}

export function renderResults(
  el: HTMLElement,
  results: JobResults,
  onResubmit?: (bitstring: string) => void,
): void {
  el.replaceChildren();
  if (results.hits.length === 0) {
    const empty = document.createElement('p');
    empty.className = 'no-results';
    empty.textContent = 'no results';
    el.appendChild(empty);
    return;
  }

  const table = document.createElement('table');
  table.className = 'results';
  const head = document.createElement('tr');
  for (const title of ['rank', 'CID', 'distance']) {
    const th = document.createElement('th');
    th.textContent = title;
    head.appendChild(th);
  }
  table.appendChild(head);

  results.hits.slice(0, MAX_RESULT_ROWS).forEach((hit, index) => {
    const row = document.createElement('tr');
    row.className = hit.distance === 0 ? 'hit exact-match' : 'hit';

    const rank = document.createElement('td');
    rank.textContent = String(index + 1);

    const cid = document.createElement('td');
    const link = document.createElement('a');
    link.href = pubchemUrl(hit.cid);
    link.target = '_blank';
    link.rel = 'noopener';
    link.textContent = String(hit.cid);
    cid.appendChild(link);
    if (hit.fingerprint !== undefined && onResubmit !== undefined) {
      const again = document.createElement('button');
      again.type = 'button';
      again.className = 'resubmit';
      again.title = 'search with this fingerprint';
      again.textContent = '↻';
      const fingerprint = hit.fingerprint;
      again.addEventListener('click', () => onResubmit(fingerprint));
      cid.appendChild(again);
    }

    const distance = document.createElement('td');
    distance.textContent = String(hit.distance);
    if (hit.distance === 0) {
      const badge = document.createElement('span');
      badge.className = 'exact-badge';
      badge.textContent = 'identical fingerprint';
      distance.appendChild(badge);
    }

    row.append(rank, cid, distance);
    table.appendChild(row);
  });
  el.appendChild(table);

  if (results.elapsed_ms !== null) {
    const meta = document.createElement('p');
    meta.className = 'results-meta';
    meta.textContent = `top ${Math.min(results.hits.length, MAX_RESULT_ROWS)} in ${(
      results.elapsed_ms / 1000
    ).toFixed(2)}s`;
    el.appendChild(meta);
  }
}

export function renderBanner(el: HTMLElement, message: string | null): void {
  el.textContent = message ?? '';
  el.hidden = message === null;
}
