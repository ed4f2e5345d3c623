import { describe, expect, it } from "vitest";

import { MAX_UPLOAD_BYTES, UploadError, loadUpload, validateFile } from "../src/upload.js";

const PNG_BYTES = new Uint8Array([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]);

describe("validateFile", () => {
  it("accepts a small png", () => {
    expect(() =>
      validateFile({ type: "image/png", size: 1024, name: "in.png" }),
    ).not.toThrow();
  });

  it("rejects non-image files with the file name in the message", () => {
    expect(() => validateFile({ type: "text/plain", size: 10, name: "notes.txt" })).toThrow(
      /notes\.txt.*not an image/,
    );
  });

  it("rejects files over 10 MB", () => {
    expect(() =>
      validateFile({ type: "image/png", size: MAX_UPLOAD_BYTES + 1, name: "huge.png" }),
    ).toThrow(/10 MB/);
  });
});

describe("loadUpload", () => {
  it("produces data and preview URLs for an image file", async () => {
    const file = new File([PNG_BYTES], "tiny.png", { type: "image/png" });
    const uploaded = await loadUpload(file);
    expect(uploaded.fileName).toBe("tiny.png");
    expect(uploaded.dataUrl.startsWith("data:image/png;base64,")).toBe(true);
    // headless DOM cannot decode pixels; preview falls back to the original
    expect(uploaded.previewUrl.length).toBeGreaterThan(0);
  });

  it("throws UploadError for a text file", async () => {
    const file = new File(["hello"], "hello.txt", { type: "text/plain" });
    await expect(loadUpload(file)).rejects.toBeInstanceOf(UploadError);
  });
});
