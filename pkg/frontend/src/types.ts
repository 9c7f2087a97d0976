/** Shared types mirroring the flowcomplete HTTP API JSON bodies. */

export interface GraphNode {
  id: string;
  category: string;
  heat_group: number | null;
}

export interface GraphEdge {
  src: string;
  dst: string;
  src_tags: string[];
  dst_tags: string[];
}

export interface GraphJson {
  nodes: GraphNode[];
  edges: GraphEdge[];
}

export type Strategy = "greedy" | "beam" | "top_k" | "top_p";

export interface StrategyParams {
  strategy: Strategy;
  beam_width: number;
  p: number;
  k: number;
  temperature: number;
  max_new_tokens: number;
  num_return: number;
  seed: number;
}

/** Defaults matching the service: beam width 5, nucleus p 0.9. */
export const DEFAULT_PARAMS: StrategyParams = {
  strategy: "beam",
  beam_width: 5,
  p: 0.9,
  k: 10,
  temperature: 1.0,
  max_new_tokens: 128,
  num_return: 3,
  seed: 0,
};

export interface Candidate {
  sfiles: string;
  log_prob: number;
  valid: boolean;
  graph: GraphJson | null;
  parse_error: string | null;
}

export interface CompletionResponse {
  prefix: string;
  candidates: Candidate[];
}

export interface ParseResult {
  ok: boolean;
  graph: GraphJson | null;
  warnings: string[];
  error: string | null;
  position: number | null;
}

export interface ModelInfo {
  model_config: Record<string, unknown>;
  vocab_size: number;
  checkpoint_hash: string | null;
}
