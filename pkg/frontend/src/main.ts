/**
 * Browser entry point. Reads `?api=<service base>&session=<id>` from the
 * URL (defaulting to same-origin), mounts the console, and wires exports
 * to file downloads.
 */

import { ForgeApi } from "./api";
import { SessionConsole } from "./controller";
import { bindConsole } from "./dom";

function download(filename: string, content: string, mime: string): void {
  const blob = new Blob([content], { type: mime });
  const url = URL.createObjectURL(blob);
  const anchor = document.createElement("a");
  anchor.href = url;
  anchor.download = filename;
  anchor.click();
  URL.revokeObjectURL(url);
}

function mount(): void {
  const root = document.getElementById("app");
  if (!root) {
    return;
  }
  const params = new URLSearchParams(window.location.search);
  const base = params.get("api") ?? window.location.origin;
  const sessionId = params.get("session");
  if (!sessionId) {
    root.innerHTML = `
      <form class="connect">
        <h1>irforge console</h1>
        <p>Open with <code>?session=&lt;id&gt;</code> (and optional
           <code>&amp;api=&lt;service url&gt;</code>), or enter a session id:</p>
        <input type="text" name="session" placeholder="ses-..." />
        <button type="submit">Open session</button>
      </form>`;
    root.querySelector("form")?.addEventListener("submit", (event) => {
      event.preventDefault();
      const input = root.querySelector<HTMLInputElement>('input[name="session"]');
      if (input?.value) {
        params.set("session", input.value.trim());
        window.location.search = params.toString();
      }
    });
    return;
  }
  const console_ = new SessionConsole(new ForgeApi(base), sessionId, (html) => {
    root.innerHTML = html;
  });
  bindConsole(root, console_, download);
  void console_.load();
}

mount();
