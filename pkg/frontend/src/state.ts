/** Client-side view state, derived entirely from server responses.
 *
 * The service's transcript is the source of truth: everything below is a
 * pure function of the GET /api/sessions/{id} body plus view-only toggles
 * (artifact viewers open or closed, uploads not yet sent).  Dropping this
 * state and refetching the session must reproduce the same rendering.
 */

import type { ArtifactDto, MessageDto, SessionDetailDto } from "./api.js";

/** A file the user picked but has not sent yet. */
export interface PendingUpload {
  filename: string;
  mediaType: string;
  dataBase64: string;
  size: number;
}

export interface UiSessionState {
  sessionId: string;
  agent: string;
  target: string;
  effectiveTarget: string;
  messages: MessageDto[];
  artifacts: ArtifactDto[];
  missingRequired: string[];
  pendingConflicts: string[];
  pendingUploads: PendingUpload[];
  /** artifact_id -> viewer expanded?  Defaults to open for every artifact. */
  openArtifacts: Record<string, boolean>;
  /** A turn is in flight; the send control must stay disabled until it lands. */
  busy: boolean;
}

export function emptyState(): UiSessionState {
  return {
    sessionId: "",
    agent: "",
    target: "",
    effectiveTarget: "",
    messages: [],
    artifacts: [],
    missingRequired: [],
    pendingConflicts: [],
    pendingUploads: [],
    openArtifacts: {},
    busy: false,
  };
}

/** Rebuild the whole view state from one session fetch.
 *
 * `prior` only contributes view toggles and unsent uploads; every fact about
 * the conversation comes from the server body, so a fresh page that calls
 * this with no prior state renders the identical transcript.
 */
export function stateFromSession(
  detail: SessionDetailDto,
  prior?: UiSessionState,
): UiSessionState {
  const openArtifacts: Record<string, boolean> = {};
  for (const art of detail.artifacts) {
    openArtifacts[art.artifact_id] = prior?.openArtifacts[art.artifact_id] ?? true;
  }
  return {
    sessionId: detail.session_id,
    agent: detail.agent,
    target: detail.target,
    effectiveTarget: detail.effective_target,
    messages: detail.messages,
    artifacts: detail.artifacts,
    missingRequired: detail.missing_required,
    pendingConflicts: detail.pending_conflicts,
    pendingUploads: prior?.pendingUploads ?? [],
    openArtifacts,
    busy: prior?.busy ?? false,
  };
}

/** Place each artifact under the assistant message that announced it.
 *
 * Assistant replies always name new artifacts by id in their text, so the
 * mapping is recomputable from the transcript alone; an id no reply mentions
 * lands in the trailing bucket.  Returns one artifact list per message plus
 * that trailing list.
 */
export function artifactsByMessage(
  messages: MessageDto[],
  artifacts: ArtifactDto[],
): { perMessage: ArtifactDto[][]; unplaced: ArtifactDto[] } {
  const perMessage: ArtifactDto[][] = messages.map(() => []);
  const unplaced: ArtifactDto[] = [];
  const seen = new Set<string>();
  for (const art of artifacts) {
    // a re-emitted script reuses its content id; show the viewer once
    if (seen.has(art.artifact_id)) continue;
    seen.add(art.artifact_id);
    const idx = messages.findIndex(
      (m) => m.role === "ASSISTANT" && m.text.includes(art.artifact_id),
    );
    if (idx >= 0) perMessage[idx]!.push(art);
    else unplaced.push(art);
  }
  return { perMessage, unplaced };
}

/** File name offered by an artifact's download control. */
export function artifactFilename(art: ArtifactDto): string {
  const base = art.path.split("/").pop() ?? art.path;
  return base || `${art.kind.toLowerCase()}-${art.artifact_id}`;
}
