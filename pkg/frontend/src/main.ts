import { startApp } from "./ui.js";

window.addEventListener("DOMContentLoaded", () => {
    startApp().catch((error) => {
        const banner = document.getElementById("error-banner");
        const text = document.getElementById("error-text");
        if (banner && text) {
            banner.hidden = false;
            text.textContent = `Failed to reach the triage server: ${error}`;
        }
    });
});
