import { ApiClient } from "./api.js";
import { wireApp } from "./dom.js";

const STATS_POLL_MS = 3000;

function boot(): void {
  const app = wireApp(document, new ApiClient());
  void app.refreshStats();
  setInterval(() => void app.refreshStats(), STATS_POLL_MS);
}

if (document.readyState === "loading") {
  document.addEventListener("DOMContentLoaded", boot);
} else {
  boot();
}
