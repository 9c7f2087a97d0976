/** Browser entry point: wires the session store to the DOM.
 *
 * Expects the element ids defined in index.html. Served alongside the
 * flowcomplete HTTP service, which it reaches with relative URLs.
 */

import { ApiClient } from "./api.js";
import { renderCandidate, renderGraph } from "./render.js";
import { SessionStore } from "./session.js";
import type { SessionState, Listener } from "./session.js";
import type { Strategy } from "./types.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function download(name: string, mime: string, text: string): void {
  const a = document.createElement("a");
  a.href = URL.createObjectURL(new Blob([text], { type: mime }));
  a.download = name;
  a.click();
  URL.revokeObjectURL(a.href);
}

export function wire(store: SessionStore): Listener {
  const prefixInput = el<HTMLTextAreaElement>("prefix");
  const parseStatus = el<HTMLDivElement>("parse-status");
  const preview = el<HTMLDivElement>("preview");
  const candidatesBox = el<HTMLDivElement>("candidates");
  const strategySel = el<HTMLSelectElement>("strategy");
  const completeBtn = el<HTMLButtonElement>("complete");
  const undoBtn = el<HTMLButtonElement>("undo");
  const exportBtn = el<HTMLButtonElement>("export");

  const numeric: Array<[string, string]> = [
    ["beam_width", "beam-width"],
    ["p", "top-p"],
    ["k", "top-k"],
    ["temperature", "temperature"],
    ["max_new_tokens", "max-new-tokens"],
    ["num_return", "num-return"],
    ["seed", "seed"],
  ];

  prefixInput.addEventListener("input", () => {
    void store.editPrefix(prefixInput.value);
  });
  strategySel.addEventListener("change", () => {
    store.setParams({ strategy: strategySel.value as Strategy });
  });
  for (const [field, id] of numeric) {
    const input = el<HTMLInputElement>(id);
    input.addEventListener("change", () => {
      store.setParams({ [field]: Number(input.value) });
    });
  }
  completeBtn.addEventListener("click", () => {
    void store.requestCompletions();
  });
  undoBtn.addEventListener("click", () => {
    store.undo();
  });
  exportBtn.addEventListener("click", () => {
    const state = store.exportState();
    if (!state) return;
    download("flowsheet.sfiles", "text/plain", state.sfiles);
    download("flowsheet.json", "application/json", JSON.stringify(state.graph, null, 2));
  });

  const update = (state: SessionState): void => {
    if (prefixInput.value !== state.prefix) prefixInput.value = state.prefix;

    if (state.error) {
      parseStatus.textContent = state.error;
      parseStatus.className = "status error";
    } else if (!state.parse) {
      parseStatus.textContent = "";
      parseStatus.className = "status";
    } else if (state.parse.ok) {
      const warn = state.parse.warnings.length
        ? ` (${state.parse.warnings.join("; ")})`
        : "";
      parseStatus.textContent = `ok${warn}`;
      parseStatus.className = "status ok";
    } else {
      const at = state.parse.position !== null ? ` at ${state.parse.position}` : "";
      parseStatus.textContent = `${state.parse.error}${at}`;
      parseStatus.className = "status error";
    }

    preview.innerHTML =
      state.parse && state.parse.ok && state.parse.graph
        ? renderGraph(state.parse.graph)
        : "";

    candidatesBox.innerHTML = state.busy
      ? "<p>completing…</p>"
      : state.candidates.map(renderCandidate).join("");
    if (!state.busy) {
      const cards = candidatesBox.querySelectorAll(".candidate.valid code");
      cards.forEach((code, i) => {
        code.addEventListener("click", () => {
          store.acceptCandidate(state.candidates[i].sfiles);
          void store.editPrefix(store.getState().prefix);
        });
      });
    }

    undoBtn.disabled = !store.canUndo();
    exportBtn.disabled = !(state.parse && state.parse.ok);
    completeBtn.disabled = state.busy;
  };
  store.subscribe(update);
  update(store.getState());
  return update;
}

if (typeof document !== "undefined" && document.getElementById("prefix")) {
  wire(new SessionStore(new ApiClient("")));
}
