export const KEY_COUNT = 166;

/**
 * Client-side check of a query bitstring; returns an error message or null.
 * Accepts 166 chars, or 167 with an unused leading bit, matching the API.
 */
export function validateBitstring(text: string): string | null {
  const trimmed = text.trim();
  if (trimmed.length === 0) {
    return 'enter a fingerprint bitstring';
  }
  if (trimmed.length !== KEY_COUNT && trimmed.length !== KEY_COUNT + 1) {
    return `bitstring must be ${KEY_COUNT} or ${KEY_COUNT + 1} characters, got ${trimmed.length}`;
  }
  for (let i = 0; i < trimmed.length; i++) {
    const c = trimmed[i];
    if (c !== '0' && c !== '1') {
      return `invalid character '${c}' at position ${i}; only 0 and 1 are allowed`;
    }
  }
  return null;
}

/** Parse a batch textarea (one bitstring per line); blank lines are skipped. */
export function parseBatch(text: string): { queries: string[]; error: string | null } {
  const queries: string[] = [];
  const lines = text.split('\n');
  for (let i = 0; i < lines.length; i++) {
    const line = (lines[i] ?? '').trim();
    if (line === '') {
      continue;
    }
    const problem = validateBitstring(line);
    if (problem !== null) {
      return { queries: [], error: `line ${i + 1}: ${problem}` };
    }
    queries.push(line);
  }
  if (queries.length === 0) {
    return { queries: [], error: 'enter at least one bitstring (one per line)' };
  }
  return { queries, error: null };
}
