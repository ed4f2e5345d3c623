import { mount } from "./app.js";

// Service base URL: ?service=http://host:port query param wins, then any
// value previously stored in this browser, then same-origin.
const params = new URLSearchParams(window.location.search);
const fromQuery = params.get("service");
if (fromQuery !== null) localStorage.setItem("textcolorize-service", fromQuery);
const baseUrl = fromQuery ?? localStorage.getItem("textcolorize-service") ?? "";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app root element");
mount(root, baseUrl);
