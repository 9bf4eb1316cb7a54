export { PdqClient, PdqServiceError } from "./client.js";
export type {
  EvaluationReport,
  FlatFrameBatch,
  PostProcessOptions,
  VersionInfo,
} from "./types.js";

/** Engine version this client is built against; /version must match. */
export const ENGINE_VERSION = "0.1.0";
