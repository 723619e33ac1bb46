/** Typed client for the slope-stability assistant service.
 *
 * Every function maps onto exactly one HTTP endpoint and returns the JSON
 * body as a typed DTO.  Failures surface as ApiError carrying the service's
 * uniform payload: { code, message, field_path? }.  No business logic lives
 * here; the browser only relays what the service says.
 */

export interface AgentDto {
  id: string;
  label: string;
}

export interface TargetDto {
  id: string;
  label: string;
  token: string;
  supports_water_table: boolean;
  supports_multilayer: boolean;
}

export interface AttachmentDto {
  filename: string;
  media_type: string;
  ref: string;
}

export interface CitationDto {
  chunk_id: string;
  doc_id: string;
  title: string;
  score: number;
}

export interface ToolCallDto {
  tool: string;
  arguments: Record<string, unknown>;
}

export interface ToolResultDto {
  ok: boolean;
  payload: unknown;
  error: { code: string; message: string; field_path?: string } | null;
  duration: number;
}

export interface MessageDto {
  role: "USER" | "ASSISTANT" | "TOOL";
  text: string;
  attachments: AttachmentDto[];
  citations: CitationDto[];
  timestamp: number;
  tool_call?: ToolCallDto;
  tool_result?: ToolResultDto;
}

export interface ArtifactDto {
  artifact_id: string;
  kind: "SCRIPT" | "RESULT" | "PLOT";
  path: string;
}

export interface SessionSummaryDto {
  session_id: string;
  agent: string;
  target: string;
  effective_target: string;
  accumulated: Record<string, unknown>;
  missing_required: string[];
  pending_conflicts: string[];
  artifacts: ArtifactDto[];
}

export interface SessionDetailDto extends SessionSummaryDto {
  messages: MessageDto[];
}

export interface MessageReplyDto {
  message: MessageDto;
  new_artifacts: ArtifactDto[];
  session: SessionSummaryDto;
}

export interface HealthDto {
  status: string;
  version: string;
  backend: string;
  kb_chunks: number;
}

/** Attachment as sent: bytes travel base64-encoded inside the JSON body. */
export interface OutgoingAttachment {
  filename: string;
  media_type: string;
  data_base64: string;
}

export class ApiError extends Error {
  readonly code: string;
  readonly fieldPath: string | null;
  readonly status: number;

  constructor(status: number, code: string, message: string, fieldPath: string | null) {
    super(message);
    this.name = "ApiError";
    this.status = status;
    this.code = code;
    this.fieldPath = fieldPath;
  }
}

async function toApiError(res: Response): Promise<ApiError> {
  let code = "error";
  let message = `${res.status} ${res.statusText}`;
  let fieldPath: string | null = null;
  try {
    const body = await res.json();
    if (body && typeof body.code === "string") code = body.code;
    if (body && typeof body.message === "string") message = body.message;
    if (body && typeof body.field_path === "string") fieldPath = body.field_path;
  } catch {
    // non-JSON error body; keep the HTTP status text
  }
  return new ApiError(res.status, code, message, fieldPath);
}

async function getJson<T>(base: string, path: string): Promise<T> {
  const res = await fetch(base + path);
  if (!res.ok) throw await toApiError(res);
  return (await res.json()) as T;
}

async function postJson<T>(base: string, path: string, body: unknown): Promise<T> {
  const res = await fetch(base + path, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(body),
  });
  if (!res.ok) throw await toApiError(res);
  return (await res.json()) as T;
}

export class ServiceClient {
  /** Empty base means same-origin, the normal case when the service hosts the UI. */
  constructor(readonly base: string = "") {}

  health(): Promise<HealthDto> {
    return getJson(this.base, "/api/health");
  }

  async listAgents(): Promise<AgentDto[]> {
    const body = await getJson<{ agents: AgentDto[] }>(this.base, "/api/agents");
    return body.agents;
  }

  async listTargets(): Promise<TargetDto[]> {
    const body = await getJson<{ targets: TargetDto[] }>(this.base, "/api/targets");
    return body.targets;
  }

  createSession(agent: string, target: string): Promise<SessionSummaryDto> {
    return postJson(this.base, "/api/sessions", { agent, target });
  }

  getSession(sessionId: string): Promise<SessionDetailDto> {
    return getJson(this.base, `/api/sessions/${encodeURIComponent(sessionId)}`);
  }

  sendMessage(
    sessionId: string,
    text: string,
    attachments: OutgoingAttachment[],
  ): Promise<MessageReplyDto> {
    return postJson(this.base, `/api/sessions/${encodeURIComponent(sessionId)}/messages`, {
      text,
      attachments,
    });
  }

  /** Raw artifact bytes plus the media type the service declared for them. */
  async fetchArtifact(
    sessionId: string,
    artifactId: string,
  ): Promise<{ bytes: Uint8Array; mediaType: string }> {
    const res = await fetch(
      `${this.base}/api/sessions/${encodeURIComponent(sessionId)}/artifacts/${encodeURIComponent(artifactId)}`,
    );
    if (!res.ok) throw await toApiError(res);
    const buf = await res.arrayBuffer();
    const mediaType = res.headers.get("Content-Type") ?? "application/octet-stream";
    return { bytes: new Uint8Array(buf), mediaType };
  }
}

/** Encode raw bytes as base64 without assuming a Node Buffer is available. */
export function bytesToBase64(bytes: Uint8Array): string {
  let binary = "";
  const step = 0x8000; // keep String.fromCharCode argument counts bounded
  for (let i = 0; i < bytes.length; i += step) {
    binary += String.fromCharCode(...bytes.subarray(i, i + step));
  }
  return btoa(binary);
}

export function base64ToBytes(data: string): Uint8Array {
  const binary = atob(data);
  const out = new Uint8Array(binary.length);
  for (let i = 0; i < binary.length; i++) out[i] = binary.charCodeAt(i);
  return out;
}
