import { ApiClient } from "./api.js";
import { createApp } from "./app.js";

createApp(document, new ApiClient()).catch((error) => {
  const banner = document.getElementById("banner");
  if (banner) {
    banner.textContent = `failed to start: ${String(error)}`;
    banner.classList.add("error");
  }
});
