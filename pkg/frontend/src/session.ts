/** Session state for the completion workbench.
 *
 * Holds the current prefix, its parse status, the candidate list, the
 * chosen strategy parameters, and a history stack of accepted states for
 * undo. All SFILES interpretation happens on the service; this store only
 * orchestrates requests and keeps responses consistent with the prefix
 * they were requested for (stale responses are discarded by request id).
 */

import { ApiClient } from "./api.js";
import type { Candidate, ParseResult, StrategyParams } from "./types.js";
import { DEFAULT_PARAMS } from "./types.js";

export interface SessionState {
  prefix: string;
  parse: ParseResult | null;
  candidates: Candidate[];
  params: StrategyParams;
  busy: boolean;
  error: string | null;
}

export type Listener = (state: SessionState) => void;

export class SessionStore {
  private state: SessionState = {
    prefix: "",
    parse: null,
    candidates: [],
    params: { ...DEFAULT_PARAMS },
    busy: false,
    error: null,
  };
  private history: string[] = [];
  private listeners: Listener[] = [];
  private parseRequestId = 0;
  private completeRequestId = 0;

  constructor(private readonly api: ApiClient) {}

  getState(): SessionState {
    return { ...this.state, candidates: [...this.state.candidates] };
  }

  getHistory(): string[] {
    return [...this.history];
  }

  subscribe(fn: Listener): () => void {
    this.listeners.push(fn);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== fn);
    };
  }

  private emit(partial: Partial<SessionState>): void {
    this.state = { ...this.state, ...partial };
    for (const fn of this.listeners) fn(this.getState());
  }

  setParams(params: Partial<StrategyParams>): void {
    this.emit({ params: { ...this.state.params, ...params } });
  }

  /** Edit the prefix and validate it against the service (lenient mode).
   * Candidates from the previous prefix are dropped immediately. */
  async editPrefix(prefix: string): Promise<void> {
    const id = ++this.parseRequestId;
    this.emit({ prefix, candidates: [], error: null });
    if (prefix === "") {
      this.emit({ parse: null });
      return;
    }
    try {
      const parse = await this.api.parsePreview(prefix);
      if (id !== this.parseRequestId) return; // superseded by a newer edit
      this.emit({ parse });
    } catch (err) {
      if (id !== this.parseRequestId) return;
      this.emit({ parse: null, error: String(err) });
    }
  }

  /** Request completions for the current prefix with the chosen strategy.
   * Only one request is considered in flight; a response is applied only
   * if the prefix has not changed since it was issued. */
  async requestCompletions(): Promise<void> {
    const id = ++this.completeRequestId;
    const prefix = this.state.prefix;
    this.emit({ busy: true, error: null });
    try {
      const res = await this.api.complete(prefix, this.state.params);
      if (id !== this.completeRequestId || this.state.prefix !== prefix) return;
      this.emit({ candidates: res.candidates, busy: false });
    } catch (err) {
      if (id !== this.completeRequestId) return;
      this.emit({ busy: false, error: String(err) });
    }
  }

  /** Accept a candidate (or a user-truncated portion of it): the text
   * becomes the new prefix, the old prefix is pushed for undo, and the
   * candidate list is cleared. */
  acceptCandidate(text: string): void {
    this.history.push(this.state.prefix);
    this.completeRequestId++; // any in-flight response is now stale
    this.emit({ prefix: text, candidates: [], parse: null, error: null });
  }

  canUndo(): boolean {
    return this.history.length > 0;
  }

  /** Restore the exact prior accepted prefix. */
  undo(): boolean {
    const prior = this.history.pop();
    if (prior === undefined) return false;
    this.completeRequestId++;
    this.emit({ prefix: prior, candidates: [], parse: null, error: null });
    return true;
  }

  /** Current graph JSON and SFILES string for download, or null while the
   * prefix does not parse. */
  exportState(): { sfiles: string; graph: unknown } | null {
    if (!this.state.parse || !this.state.parse.ok) return null;
    return { sfiles: this.state.prefix, graph: this.state.parse.graph };
  }
}
