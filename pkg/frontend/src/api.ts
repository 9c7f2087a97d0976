/** Thin typed client for the flowcomplete HTTP API.
 *
 * The fetch implementation is injectable so tests can run without a
 * browser or a live service.
 */

import type {
  CompletionResponse,
  GraphJson,
  ModelInfo,
  ParseResult,
  StrategyParams,
} from "./types.js";

export type FetchLike = (
  url: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<{ status: number; json(): Promise<unknown> }>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = fetch as unknown as FetchLike,
  ) {}

  private async post(path: string, body: unknown): Promise<unknown> {
    const res = await this.fetchImpl(this.baseUrl + path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    const doc = (await res.json()) as Record<string, unknown>;
    if (res.status >= 400) {
      throw new ApiError(res.status, String(doc["error"] ?? `HTTP ${res.status}`));
    }
    return doc;
  }

  /** Lenient parse used for live prefix preview; lexical errors are
   * returned as a result, not thrown, so the editor can highlight them. */
  async parsePreview(sfiles: string): Promise<ParseResult> {
    const res = await this.fetchImpl(this.baseUrl + "/api/parse", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ sfiles, mode: "lenient" }),
    });
    const doc = (await res.json()) as Record<string, unknown>;
    if (res.status === 200) {
      return {
        ok: true,
        graph: doc["graph"] as GraphJson,
        warnings: (doc["warnings"] as string[]) ?? [],
        error: null,
        position: null,
      };
    }
    if (res.status === 422) {
      return {
        ok: false,
        graph: null,
        warnings: [],
        error: String(doc["error"] ?? "invalid input"),
        position: typeof doc["position"] === "number" ? (doc["position"] as number) : null,
      };
    }
    throw new ApiError(res.status, String(doc["error"] ?? `HTTP ${res.status}`));
  }

  async complete(prefix: string, params: StrategyParams): Promise<CompletionResponse> {
    const body: Record<string, unknown> = {
      sfiles_prefix: prefix,
      lenient: true,
      return_graphs: true,
      strategy: params.strategy,
      max_new_tokens: params.max_new_tokens,
      num_return: params.num_return,
      seed: params.seed,
      temperature: params.temperature,
    };
    if (params.strategy === "beam") body["beam_width"] = params.beam_width;
    if (params.strategy === "top_p") body["p"] = params.p;
    if (params.strategy === "top_k") body["k"] = params.k;
    return (await this.post("/api/complete", body)) as unknown as CompletionResponse;
  }

  async serialize(graph: GraphJson): Promise<string> {
    const doc = (await this.post("/api/serialize", { graph })) as { sfiles: string };
    return doc.sfiles;
  }

  async modelInfo(): Promise<ModelInfo> {
    const res = await this.fetchImpl(this.baseUrl + "/api/model");
    const doc = (await res.json()) as Record<string, unknown>;
    if (res.status >= 400) {
      throw new ApiError(res.status, String(doc["error"] ?? `HTTP ${res.status}`));
    }
    return doc as unknown as ModelInfo;
  }
}
