/** Wire types mirrored from the interaction-service JSON API. */

export interface SystemInfo {
  system_id: string;
  description: string;
  dataset: string;
  tasks: Record<string, string>;
  catalog_size: number;
  top_k: number;
}

export interface Profile {
  items: number[];
  sentences: string[];
}

export interface PolicyChoice {
  label_id: number;
  label: string;
  prob: number;
}

export interface PolicyOutput {
  label_id: number;
  label: string;
  top: PolicyChoice[];
  overridden: boolean;
}

export interface Recommendation {
  item_id: number;
  name: string;
  score: number;
}

export interface Turn {
  turn_id: number;
  user_text: string;
  policy_output: PolicyOutput | null;
  recommendations: Recommendation[] | null;
  response: string | null;
  overrides_applied: Record<string, unknown>;
  created_at: number;
}

export interface Session {
  session_id: string;
  system_id: string;
  profile: Profile;
  turns: Turn[];
  status: "open" | "closed";
}

export interface ApiErrorBody {
  code: string;
  message: string;
  details: Record<string, unknown>;
}

export type OverrideField = "recommendations" | "policy";
