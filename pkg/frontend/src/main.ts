import { StudioApp } from "./app.js";

const wsUrl = `${location.protocol === "https:" ? "wss" : "ws"}://${location.host}/ws`;
new StudioApp(document, wsUrl);
