/** DOM rendering for the chat transcript.
 *
 * renderTranscript rebuilds the message area from UiSessionState on every
 * change instead of patching nodes incrementally: the transcript is small
 * and full rebuilds make "state -> DOM" a pure mapping, which is what lets
 * a reloaded page come out pixel-identical.
 */

import { bytesToBase64 } from "./api.js";
import type { ArtifactDto, CitationDto, MessageDto } from "./api.js";
import { artifactFilename, artifactsByMessage } from "./state.js";
import type { UiSessionState } from "./state.js";

/** Fetched artifact bodies, keyed by artifact id. */
export type ArtifactContent = Map<string, { bytes: Uint8Array; mediaType: string }>;

const decoder = new TextDecoder();

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function downloadLink(art: ArtifactDto, content: { bytes: Uint8Array; mediaType: string }) {
  // data: URI instead of a blob URL so the bytes live in the href itself;
  // parameter whitespace ("; charset=") is not valid inside a data: URI
  const media = content.mediaType.replace(/\s+/g, "");
  const a = el("a", "download-link", "download");
  a.href = `data:${media};base64,${bytesToBase64(content.bytes)}`;
  a.download = artifactFilename(art);
  a.dataset.artifactId = art.artifact_id;
  return a;
}

function copyButton(text: string): HTMLButtonElement {
  const btn = el("button", "copy-btn", "copy");
  btn.type = "button";
  btn.addEventListener("click", () => {
    const done = () => {
      btn.textContent = "copied";
      setTimeout(() => (btn.textContent = "copy"), 1200);
    };
    if (navigator.clipboard?.writeText) {
      navigator.clipboard.writeText(text).then(done, done);
    } else {
      done();
    }
  });
  return btn;
}

function scriptCard(
  art: ArtifactDto,
  content: { bytes: Uint8Array; mediaType: string },
  open: boolean,
  onToggle: (id: string, open: boolean) => void,
): HTMLElement {
  const text = decoder.decode(content.bytes);
  const card = el("details", "artifact artifact-script") as HTMLDetailsElement;
  card.open = open;
  card.dataset.artifactId = art.artifact_id;
  card.addEventListener("toggle", () => onToggle(art.artifact_id, card.open));
  const summary = el("summary");
  summary.append(
    el("span", "artifact-kind", "script"),
    el("span", "artifact-name", artifactFilename(art)),
    copyButton(text),
    downloadLink(art, content),
  );
  const pre = el("pre", "script-block");
  pre.appendChild(el("code", undefined, text));
  card.append(summary, pre);
  return card;
}

function resultCard(
  art: ArtifactDto,
  content: { bytes: Uint8Array; mediaType: string },
  open: boolean,
  onToggle: (id: string, open: boolean) => void,
): HTMLElement {
  const card = el("details", "artifact artifact-result") as HTMLDetailsElement;
  card.open = open;
  card.dataset.artifactId = art.artifact_id;
  card.addEventListener("toggle", () => onToggle(art.artifact_id, card.open));
  const summary = el("summary");
  summary.append(
    el("span", "artifact-kind", "result"),
    el("span", "artifact-name", artifactFilename(art)),
    downloadLink(art, content),
  );
  card.appendChild(summary);
  try {
    const parsed = JSON.parse(decoder.decode(content.bytes));
    const fos = el("div", "fos-line");
    fos.append(
      el("span", "fos-label", "FS"),
      el("span", "fos-value", Number(parsed.fos).toFixed(3)),
      el("span", "fos-method", String(parsed.meta?.method ?? "")),
    );
    card.appendChild(fos);
    const c = parsed.critical_circle;
    if (c) {
      card.appendChild(
        el(
          "div",
          "circle-line",
          `critical circle x=${c.x} y=${c.y} r=${c.radius}`,
        ),
      );
    }
  } catch {
    card.appendChild(el("div", "circle-line", "unreadable result payload"));
  }
  return card;
}

function plotCard(
  art: ArtifactDto,
  content: { bytes: Uint8Array; mediaType: string },
  open: boolean,
  onToggle: (id: string, open: boolean) => void,
): HTMLElement {
  const card = el("details", "artifact artifact-plot") as HTMLDetailsElement;
  card.open = open;
  card.dataset.artifactId = art.artifact_id;
  card.addEventListener("toggle", () => onToggle(art.artifact_id, card.open));
  const summary = el("summary");
  summary.append(
    el("span", "artifact-kind", "plot"),
    el("span", "artifact-name", artifactFilename(art)),
    downloadLink(art, content),
  );
  const holder = el("div", "plot-holder");
  // the service declares image/svg+xml for plots; inline the markup so the
  // cross-section scales with the column instead of living in an <img> box
  holder.innerHTML = decoder.decode(content.bytes);
  card.append(summary, holder);
  return card;
}

export function artifactCard(
  art: ArtifactDto,
  content: { bytes: Uint8Array; mediaType: string } | undefined,
  open: boolean,
  onToggle: (id: string, open: boolean) => void,
): HTMLElement {
  if (!content) {
    const placeholder = el("div", "artifact artifact-loading");
    placeholder.dataset.artifactId = art.artifact_id;
    placeholder.textContent = `${art.kind.toLowerCase()} ${art.artifact_id} loading`;
    return placeholder;
  }
  if (art.kind === "SCRIPT") return scriptCard(art, content, open, onToggle);
  if (art.kind === "RESULT") return resultCard(art, content, open, onToggle);
  return plotCard(art, content, open, onToggle);
}

function citationChips(citations: CitationDto[]): HTMLElement {
  const row = el("div", "citations");
  for (const c of citations) {
    row.appendChild(el("span", "citation", `${c.title} [${c.chunk_id}]`));
  }
  return row;
}

function messageBubble(msg: MessageDto): HTMLElement {
  if (msg.role === "TOOL") {
    const status = msg.tool_result?.ok === false ? "failed" : "ok";
    const line = el(
      "div",
      "tool-line",
      `tool ${msg.tool_call?.tool ?? "?"} ${status} (${(msg.tool_result?.duration ?? 0).toFixed(2)}s)`,
    );
    return line;
  }
  const bubble = el("div", `bubble bubble-${msg.role.toLowerCase()}`);
  const body = el("div", "bubble-text", msg.text);
  bubble.appendChild(body);
  if (msg.attachments.length > 0) {
    const row = el("div", "attachments");
    for (const att of msg.attachments) {
      row.appendChild(el("span", "attachment-chip", `${att.filename} (${att.media_type})`));
    }
    bubble.appendChild(row);
  }
  if (msg.citations.length > 0) bubble.appendChild(citationChips(msg.citations));
  return bubble;
}

/** Inline system message for a failed request; never part of the transcript. */
export function errorBubble(code: string, message: string, fieldPath: string | null): HTMLElement {
  const bubble = el("div", "bubble bubble-error");
  bubble.appendChild(el("span", "error-code", code));
  const detail = fieldPath ? `${fieldPath}: ${message}` : message;
  bubble.appendChild(el("span", "error-text", detail));
  return bubble;
}

/** Checklist of the problem fields the agent still needs, by canonical path. */
export function renderChecklist(container: HTMLElement, state: UiSessionState): void {
  container.replaceChildren();
  if (!state.sessionId) return;
  if (state.missingRequired.length === 0 && state.pendingConflicts.length === 0) {
    container.appendChild(el("div", "checklist-done", "problem fully specified"));
    return;
  }
  if (state.missingRequired.length > 0) {
    container.appendChild(el("div", "checklist-title", "still needed"));
    const list = el("ul", "checklist");
    for (const path of state.missingRequired) {
      const item = el("li", "checklist-item");
      item.append(el("input") as HTMLInputElement, el("span", undefined, path));
      const box = item.querySelector("input")!;
      box.type = "checkbox";
      box.disabled = true;
      list.appendChild(item);
    }
    container.appendChild(list);
  }
  if (state.pendingConflicts.length > 0) {
    container.appendChild(el("div", "checklist-title conflict", "conflicting values"));
    const list = el("ul", "checklist");
    for (const path of state.pendingConflicts) {
      list.appendChild(el("li", "checklist-item conflict", path));
    }
    container.appendChild(list);
  }
}

/** Rebuild the transcript pane: bubbles interleaved with artifact cards. */
export function renderTranscript(
  container: HTMLElement,
  state: UiSessionState,
  contents: ArtifactContent,
  onToggle: (id: string, open: boolean) => void,
  trailing: HTMLElement[] = [],
): void {
  container.replaceChildren();
  const { perMessage, unplaced } = artifactsByMessage(state.messages, state.artifacts);
  state.messages.forEach((msg, i) => {
    container.appendChild(messageBubble(msg));
    for (const art of perMessage[i] ?? []) {
      container.appendChild(
        artifactCard(
          art,
          contents.get(art.artifact_id),
          state.openArtifacts[art.artifact_id] ?? true,
          onToggle,
        ),
      );
    }
  });
  for (const art of unplaced) {
    container.appendChild(
      artifactCard(
        art,
        contents.get(art.artifact_id),
        state.openArtifacts[art.artifact_id] ?? true,
        onToggle,
      ),
    );
  }
  for (const node of trailing) container.appendChild(node);
  container.scrollTop = container.scrollHeight;
}
