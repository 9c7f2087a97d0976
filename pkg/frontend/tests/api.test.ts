import { describe, expect, it } from "vitest";
import { ApiClient, ApiError } from "../src/api.js";
import type { FetchLike } from "../src/api.js";
import { DEFAULT_PARAMS } from "../src/types.js";

interface Call {
  url: string;
  body: Record<string, unknown> | null;
}

function fakeFetch(
  respond: (url: string, body: Record<string, unknown> | null) => { status: number; doc: unknown },
): { fetch: FetchLike; calls: Call[] } {
  const calls: Call[] = [];
  const fetch: FetchLike = async (url, init) => {
    const body = init?.body ? (JSON.parse(init.body) as Record<string, unknown>) : null;
    calls.push({ url, body });
    const { status, doc } = respond(url, body);
    return { status, json: async () => doc };
  };
  return { fetch, calls };
}

describe("ApiClient.parsePreview", () => {
  it("returns the graph and warnings on success", async () => {
    const graph = { nodes: [{ id: "raw-0", category: "raw", heat_group: null }], edges: [] };
    const { fetch, calls } = fakeFetch(() => ({
      status: 200,
      doc: { graph, warnings: ["stripped 1 character"] },
    }));
    const res = await new ApiClient("", fetch).parsePreview("(raw)");
    expect(res.ok).toBe(true);
    expect(res.graph).toEqual(graph);
    expect(res.warnings).toEqual(["stripped 1 character"]);
    expect(calls[0].url).toBe("/api/parse");
    expect(calls[0].body).toEqual({ sfiles: "(raw)", mode: "lenient" });
  });

  it("turns a 422 into a result with the error position, not a throw", async () => {
    const { fetch } = fakeFetch(() => ({
      status: 422,
      doc: { error: "stray character 'x'", position: 5 },
    }));
    const res = await new ApiClient("", fetch).parsePreview("(raw)x");
    expect(res.ok).toBe(false);
    expect(res.error).toBe("stray character 'x'");
    expect(res.position).toBe(5);
  });

  it("throws ApiError on unexpected statuses", async () => {
    const { fetch } = fakeFetch(() => ({ status: 503, doc: { error: "no model loaded" } }));
    await expect(new ApiClient("", fetch).parsePreview("(raw)")).rejects.toThrow(ApiError);
  });
});

describe("ApiClient.complete", () => {
  it("sends only the parameters of the chosen strategy", async () => {
    const { fetch, calls } = fakeFetch(() => ({
      status: 200,
      doc: { prefix: "(raw)", candidates: [] },
    }));
    const client = new ApiClient("", fetch);
    await client.complete("(raw)", { ...DEFAULT_PARAMS, strategy: "beam" });
    expect(calls[0].body).toMatchObject({ strategy: "beam", beam_width: 5, lenient: true });
    expect(calls[0].body).not.toHaveProperty("p");

    await client.complete("(raw)", { ...DEFAULT_PARAMS, strategy: "top_p" });
    expect(calls[1].body).toMatchObject({ strategy: "top_p", p: 0.9 });
    expect(calls[1].body).not.toHaveProperty("beam_width");
  });

  it("maps HTTP errors to ApiError with the server message", async () => {
    const { fetch } = fakeFetch(() => ({ status: 400, doc: { error: "unknown field 'w'" } }));
    await expect(
      new ApiClient("", fetch).complete("(raw)", DEFAULT_PARAMS),
    ).rejects.toMatchObject({ status: 400, message: "unknown field 'w'" });
  });
});

describe("ApiClient.serialize and modelInfo", () => {
  it("round-trips the sfiles field", async () => {
    const { fetch, calls } = fakeFetch(() => ({ status: 200, doc: { sfiles: "(raw)(prod)" } }));
    const s = await new ApiClient("", fetch).serialize({ nodes: [], edges: [] });
    expect(s).toBe("(raw)(prod)");
    expect(calls[0].url).toBe("/api/serialize");
  });

  it("prefixes the base URL", async () => {
    const { fetch, calls } = fakeFetch(() => ({
      status: 200,
      doc: { model_config: {}, vocab_size: 44, checkpoint_hash: "ab" },
    }));
    const info = await new ApiClient("http://host:9000", fetch).modelInfo();
    expect(info.vocab_size).toBe(44);
    expect(calls[0].url).toBe("http://host:9000/api/model");
  });
});
