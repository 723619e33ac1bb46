/** Page wiring: dropdowns, composer, uploads, and the render loop.
 *
 * The browser keeps no truth of its own.  After every accepted turn the app
 * refetches the session and rebuilds the page from that body, so a reload
 * (or a second browser) lands on the identical transcript.  Request failures
 * never touch the transcript; they show as inline system messages until the
 * next accepted turn.
 */

import { ApiError, ServiceClient, bytesToBase64 } from "./api.js";
import type { OutgoingAttachment } from "./api.js";
import { emptyState, stateFromSession } from "./state.js";
import type { PendingUpload, UiSessionState } from "./state.js";
import { errorBubble, renderChecklist, renderTranscript } from "./render.js";
import type { ArtifactContent } from "./render.js";

export interface AppHandle {
  /** Resolves once the enumerations are loaded and any hash session is shown. */
  ready: Promise<void>;
  /** Resolves when no request is in flight and the last render is applied. */
  idle(): Promise<void>;
  state(): UiSessionState;
  client: ServiceClient;
}

function must<T extends HTMLElement>(root: Document, id: string): T {
  const node = root.getElementById(id);
  if (!node) throw new Error(`missing #${id} in page`);
  return node as T;
}

export function initApp(root: Document, baseOverride?: string): AppHandle {
  const meta = root.querySelector('meta[name="api-base"]') as HTMLMetaElement | null;
  const client = new ServiceClient(baseOverride ?? meta?.content ?? "");

  const agentSel = must<HTMLSelectElement>(root, "agent-select");
  const targetSel = must<HTMLSelectElement>(root, "target-select");
  const newSessionBtn = must<HTMLButtonElement>(root, "new-session");
  const sessionLine = must<HTMLElement>(root, "session-line");
  const healthLine = must<HTMLElement>(root, "health-line");
  const fileInput = must<HTMLInputElement>(root, "file-input");
  const uploadList = must<HTMLElement>(root, "upload-list");
  const checklistEl = must<HTMLElement>(root, "checklist");
  const transcriptEl = must<HTMLElement>(root, "transcript");
  const composer = must<HTMLFormElement>(root, "composer");
  const promptEl = must<HTMLTextAreaElement>(root, "prompt");
  const sendBtn = must<HTMLButtonElement>(root, "send");

  let state = emptyState();
  const contents: ArtifactContent = new Map();
  let errorNodes: HTMLElement[] = [];

  let inFlight = 0;
  let idleWaiters: (() => void)[] = [];
  const begin = () => {
    inFlight += 1;
  };
  const end = () => {
    inFlight -= 1;
    if (inFlight === 0) {
      const waiters = idleWaiters;
      idleWaiters = [];
      for (const w of waiters) w();
    }
  };

  const onToggle = (id: string, open: boolean) => {
    state.openArtifacts[id] = open;
  };

  function renderUploads(): void {
    uploadList.replaceChildren();
    state.pendingUploads.forEach((up, i) => {
      const chip = root.createElement("span");
      chip.className = "upload-chip";
      chip.textContent = `${up.filename} (${up.size} B)`;
      const remove = root.createElement("button");
      remove.type = "button";
      remove.className = "chip-remove";
      remove.textContent = "x";
      remove.addEventListener("click", () => {
        state.pendingUploads.splice(i, 1);
        render();
      });
      chip.appendChild(remove);
      uploadList.appendChild(chip);
    });
  }

  function render(): void {
    renderTranscript(transcriptEl, state, contents, onToggle, errorNodes);
    renderChecklist(checklistEl, state);
    renderUploads();
    sendBtn.disabled = state.busy;
    const haveSession = state.sessionId !== "";
    // the session's agent and dialect are fixed at creation; the dropdowns
    // go read-only until "new session" so they always show the truth
    agentSel.disabled = haveSession;
    targetSel.disabled = haveSession;
    if (haveSession) {
      agentSel.value = state.agent;
      targetSel.value = state.target;
      sessionLine.textContent = `session ${state.sessionId} (${state.effectiveTarget})`;
    } else {
      sessionLine.textContent = "no session";
    }
  }

  async function ensureContents(): Promise<void> {
    const missing = state.artifacts.filter((a) => !contents.has(a.artifact_id));
    await Promise.all(
      missing.map(async (a) => {
        contents.set(a.artifact_id, await client.fetchArtifact(state.sessionId, a.artifact_id));
      }),
    );
  }

  async function refresh(): Promise<void> {
    const detail = await client.getSession(state.sessionId);
    state = stateFromSession(detail, state);
    await ensureContents();
  }

  async function startSession(): Promise<void> {
    const summary = await client.createSession(agentSel.value, targetSel.value);
    state = { ...emptyState(), sessionId: summary.session_id };
    await refresh();
    root.defaultView?.history.replaceState(null, "", `#s=${state.sessionId}`);
  }

  function showError(err: unknown): void {
    if (err instanceof ApiError) {
      errorNodes.push(errorBubble(err.code, err.message, err.fieldPath));
    } else {
      errorNodes.push(errorBubble("network_error", String(err), null));
    }
  }

  async function onSend(ev: Event): Promise<void> {
    ev.preventDefault();
    if (state.busy) return;
    const text = promptEl.value.trim();
    if (text === "" && state.pendingUploads.length === 0) return;
    state.busy = true;
    render();
    begin();
    try {
      if (state.sessionId === "") await startSession();
      const outgoing: OutgoingAttachment[] = state.pendingUploads.map((up: PendingUpload) => ({
        filename: up.filename,
        media_type: up.mediaType,
        data_base64: up.dataBase64,
      }));
      await client.sendMessage(state.sessionId, text, outgoing);
      promptEl.value = "";
      state.pendingUploads = [];
      errorNodes = [];
      await refresh();
    } catch (err) {
      showError(err);
    } finally {
      state.busy = false;
      render();
      end();
    }
  }

  function readFileBytes(file: File): Promise<Uint8Array> {
    if (typeof file.arrayBuffer === "function") {
      return file.arrayBuffer().then((buf) => new Uint8Array(buf));
    }
    return new Promise((resolve, reject) => {
      const reader = new FileReader();
      reader.onerror = () => reject(reader.error);
      reader.onload = () => resolve(new Uint8Array(reader.result as ArrayBuffer));
      reader.readAsArrayBuffer(file);
    });
  }

  async function onPickFiles(): Promise<void> {
    const files = Array.from(fileInput.files ?? []);
    begin();
    try {
      for (const file of files) {
        const bytes = await readFileBytes(file);
        state.pendingUploads.push({
          filename: file.name,
          mediaType: file.type || "application/octet-stream",
          dataBase64: bytesToBase64(bytes),
          size: bytes.length,
        });
      }
      fileInput.value = "";
      render();
    } finally {
      end();
    }
  }

  async function onNewSession(): Promise<void> {
    if (state.busy) return;
    state.busy = true;
    render();
    begin();
    try {
      await startSession();
      errorNodes = [];
    } catch (err) {
      showError(err);
      state = emptyState();
    } finally {
      state.busy = false;
      render();
      end();
    }
  }

  composer.addEventListener("submit", (ev) => {
    void onSend(ev);
  });
  fileInput.addEventListener("change", () => {
    void onPickFiles();
  });
  newSessionBtn.addEventListener("click", () => {
    void onNewSession();
  });

  async function boot(): Promise<void> {
    begin();
    try {
      const [health, agents, targets] = await Promise.all([
        client.health(),
        client.listAgents(),
        client.listTargets(),
      ]);
      healthLine.textContent = `service ${health.version} (${health.backend}, ${health.kb_chunks} kb chunks)`;
      agentSel.replaceChildren();
      for (const agent of agents) {
        const opt = root.createElement("option");
        opt.value = agent.id;
        opt.textContent = agent.label;
        agentSel.appendChild(opt);
      }
      targetSel.replaceChildren();
      for (const target of targets) {
        const opt = root.createElement("option");
        opt.value = target.id;
        opt.textContent = target.label;
        targetSel.appendChild(opt);
      }
      const hash = new URLSearchParams((root.defaultView?.location.hash ?? "").replace(/^#/, ""));
      const fromHash = hash.get("s");
      if (fromHash) {
        state = { ...emptyState(), sessionId: fromHash };
        await refresh();
      }
      render();
    } catch (err) {
      healthLine.textContent = "service unreachable";
      showError(err);
      render();
    } finally {
      end();
    }
  }

  const ready = boot();

  return {
    ready,
    idle: () =>
      new Promise<void>((resolve) => {
        if (inFlight === 0) resolve();
        else idleWaiters.push(resolve);
      }),
    state: () => state,
    client,
  };
}

// browser entry point; tests build their own DOM and call initApp directly
if (typeof document !== "undefined" && document.body?.dataset.autoinit === "app") {
  initApp(document);
}
