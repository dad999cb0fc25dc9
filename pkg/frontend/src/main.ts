/**
 * Browser entry point. Reads the service URL from ?service=..., defaulting
 * to same-origin. The bearer token is kept in sessionStorage so a page
 * refresh resumes the same annotator session — progress always comes back
 * from the server, which is the source of truth.
 */

import { ReviewApi } from "./api.js";
import { ReviewApp } from "./app.js";

const TOKEN_KEY = "review-ui.token";

function serviceUrl(): string {
  const params = new URLSearchParams(window.location.search);
  return params.get("service") ?? window.location.origin;
}

async function boot(): Promise<void> {
  const root = document.getElementById("app");
  if (root === null) {
    throw new Error("missing #app mount point");
  }
  const stored = window.sessionStorage.getItem(TOKEN_KEY);
  const api = new ReviewApi(serviceUrl(), stored);
  const app = new ReviewApp(root, api);
  try {
    if (stored) {
      await app.resume(stored);
    } else {
      const name = window.prompt("Annotator name (optional):") ?? undefined;
      const registration = await api.register(name || undefined);
      window.sessionStorage.setItem(TOKEN_KEY, registration.token);
      await app.resume(registration.token);
    }
  } catch (err) {
    window.sessionStorage.removeItem(TOKEN_KEY);
    root.textContent = `Could not start a review session: ${String(err)}`;
  }
}

void boot();
