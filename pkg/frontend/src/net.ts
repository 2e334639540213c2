/** Fetch helpers: retry with backoff, plus stale-response dropping so a
 * superseded scenario can never paint over the current one. */

export interface FetchOptions {
  retries?: number;
  backoffMs?: number;
  onError?: (err: unknown, attempt: number) => void;
}

export async function fetchWithRetry(
  url: string,
  { retries = 3, backoffMs = 400, onError }: FetchOptions = {},
): Promise<Response> {
  let attempt = 0;
  for (;;) {
    try {
      const res = await fetch(url);
      if (!res.ok && res.status >= 500 && attempt < retries) throw new Error(`${res.status}`);
      return res;
    } catch (err) {
      attempt += 1;
      onError?.(err, attempt);
      if (attempt > retries) throw err;
      await new Promise((r) => setTimeout(r, backoffMs * 2 ** (attempt - 1)));
    }
  }
}

export async function fetchJson<T>(url: string, opts?: FetchOptions): Promise<T> {
  const res = await fetchWithRetry(url, opts);
  if (!res.ok) throw new Error(`GET ${url} -> ${res.status}`);
  return (await res.json()) as T;
}

export async function fetchBinary(url: string, opts?: FetchOptions): Promise<ArrayBuffer> {
  const res = await fetchWithRetry(url, opts);
  if (!res.ok) throw new Error(`GET ${url} -> ${res.status}`);
  return await res.arrayBuffer();
}

/** Monotonic token gate: only the latest request generation may apply. */
export class StaleDropper {
  private generation = 0;

  /** Call when state changes; invalidates everything in flight. */
  bump(): number {
    return ++this.generation;
  }

  isCurrent(token: number): boolean {
    return token === this.generation;
  }
}
