import { ApiClient } from "./api";
import { EditorApp } from "./app";
import { EditorStore } from "./store";

const root = document.getElementById("app");
if (root === null) {
  throw new Error("missing #app container");
}
// same-origin by default; point elsewhere with ?api=http://host:port
const base = new URLSearchParams(window.location.search).get("api") ?? "";
new EditorApp(root, new EditorStore(new ApiClient(base)));
