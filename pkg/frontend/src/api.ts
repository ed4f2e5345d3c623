// HTTP client for the colorization service.

export interface HealthStatus {
  status: "ok" | "degraded";
  checkpoints: string[];
  version: string;
}

export interface ColorizeResult {
  /** base64-encoded PNG exactly as the server produced it */
  image: string;
  model: string;
  elapsed_ms: number;
}

export class ServiceError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ServiceError";
  }
}

async function errorDetail(response: Response): Promise<string> {
  try {
    const body = await response.json();
    if (body && typeof body.detail === "string") return body.detail;
  } catch {
    /* non-JSON error body */
  }
  return response.statusText || `HTTP ${response.status}`;
}

export class ColorizeClient {
  constructor(private readonly baseUrl: string = "") {}

  async health(): Promise<HealthStatus> {
    const response = await fetch(`${this.baseUrl}/api/health`);
    if (!response.ok) throw new ServiceError(response.status, await errorDetail(response));
    return (await response.json()) as HealthStatus;
  }

  async colorize(
    imageBase64: string,
    description: string,
    checkpoint?: string,
  ): Promise<ColorizeResult> {
    const payload: Record<string, string> = { image: imageBase64, description };
    if (checkpoint) payload.checkpoint = checkpoint;
    const response = await fetch(`${this.baseUrl}/api/colorize`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
    if (!response.ok) throw new ServiceError(response.status, await errorDetail(response));
    return (await response.json()) as ColorizeResult;
  }
}

/** Strip the data-URL prefix so only the raw base64 payload crosses the wire. */
export function dataUrlToBase64(dataUrl: string): string {
  const comma = dataUrl.indexOf(",");
  return comma >= 0 ? dataUrl.slice(comma + 1) : dataUrl;
}
