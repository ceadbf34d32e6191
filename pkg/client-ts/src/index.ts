export * from "./wire.js";
export * from "./client.js";
