import { App } from "./app.js";
import { HttpTransport } from "./protocol.js";

const root = document.getElementById("app");
if (!root) {
  throw new Error("missing #app container");
}
new App(root, new HttpTransport()).init();
