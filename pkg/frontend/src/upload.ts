// Client-side file intake: validate, read, and downscale a preview.
// The preview is only for display; the original bytes go to the server.

export const MAX_UPLOAD_BYTES = 10 * 1024 * 1024;
export const PREVIEW_MAX_SIDE = 512;

export class UploadError extends Error {}

export interface UploadedImage {
  /** data URL of the original file (sent to the service) */
  dataUrl: string;
  /** data URL of a downscaled preview for display */
  previewUrl: string;
  fileName: string;
}

export function validateFile(file: { type: string; size: number; name: string }): void {
  if (!file.type.startsWith("image/")) {
    throw new UploadError(`"${file.name}" is not an image file`);
  }
  if (file.size > MAX_UPLOAD_BYTES) {
    const mb = (file.size / (1024 * 1024)).toFixed(1);
    throw new UploadError(`"${file.name}" is ${mb} MB; the limit is 10 MB`);
  }
}

function readAsDataUrl(file: Blob): Promise<string> {
  return new Promise((resolve, reject) => {
    const reader = new FileReader();
    reader.onload = () => resolve(reader.result as string);
    reader.onerror = () => reject(new UploadError("could not read the file"));
    reader.readAsDataURL(file);
  });
}

const DECODE_FALLBACK_MS = 150;

function downscale(dataUrl: string): Promise<string> {
  return new Promise((resolve) => {
    // environments without real image decoding (headless DOM in tests)
    // never fire load/error; fall back to the original after a short wait
    const fallback = setTimeout(() => resolve(dataUrl), DECODE_FALLBACK_MS);
    const finish = (url: string) => {
      clearTimeout(fallback);
      resolve(url);
    };
    const img = new Image();
    img.onload = () => {
      const longSide = Math.max(img.width, img.height);
      if (!longSide || longSide <= PREVIEW_MAX_SIDE) {
        finish(dataUrl);
        return;
      }
      const scale = PREVIEW_MAX_SIDE / longSide;
      const canvas = document.createElement("canvas");
      canvas.width = Math.round(img.width * scale);
      canvas.height = Math.round(img.height * scale);
      const ctx = canvas.getContext("2d");
      if (!ctx) {
        finish(dataUrl);
        return;
      }
      ctx.drawImage(img, 0, 0, canvas.width, canvas.height);
      finish(canvas.toDataURL("image/png"));
    };
    img.onerror = () => finish(dataUrl);
    img.src = dataUrl;
  });
}

export async function loadUpload(file: File): Promise<UploadedImage> {
  validateFile(file);
  const dataUrl = await readAsDataUrl(file);
  const previewUrl = await downscale(dataUrl);
  return { dataUrl, previewUrl, fileName: file.name };
}
