/** Wire types for the inversion/editing service. Field names match the JSON. */

export interface CodeWire {
  space: string;
  layers: number;
  dim: number;
  values: number[];
}

export interface LossBreakdown {
  pixel: number;
  perceptual: number;
  domain: number;
  total: number;
}

export interface InversionParams {
  steps?: number;
  step_size?: number;
  lambda_dom?: number;
  lambda_vgg?: number;
  init?: string;
  seed?: number;
}

export interface HealthResponse {
  status: string;
  checkpoint: string;
  resolution: number;
  layers: number;
  dim: number;
  max_steps: number;
  has_encoder: boolean;
  has_extractor: boolean;
}

export interface BoundaryInfo {
  attribute: string;
  dim: number;
  train_accuracy: number;
}

export interface BoundariesResponse {
  alpha_range: [number, number];
  boundaries: BoundaryInfo[];
}

export interface InvertResponse {
  image: string; // base64 PNG
  code: CodeWire;
  losses: LossBreakdown;
  best_step: number;
  resolved: Record<string, unknown>;
  timing: { seconds: number };
}

export interface EditResponse {
  image: string;
  code: CodeWire;
  losses: LossBreakdown | null;
  resolved: Record<string, unknown>;
  timing: { seconds: number };
}

export interface InterpolateResponse {
  image: string;
  code: CodeWire;
  resolved: Record<string, unknown>;
  timing: { seconds: number };
}

export interface DiffuseResponse {
  image: string;
  stitched: string;
  code: CodeWire;
  losses: LossBreakdown;
  resolved: Record<string, unknown>;
  timing: { seconds: number };
}

export interface InvertRequest {
  image: string;
  mask?: string;
  params?: InversionParams;
  checkpoint?: string;
}

export interface EditRequest {
  attribute: string;
  alpha: number;
  layers?: number[];
  code?: CodeWire;
  image?: string;
  params?: InversionParams;
  checkpoint?: string;
}

export interface InterpolateRequest {
  code_a: CodeWire;
  code_b: CodeWire;
  lam: number;
  checkpoint?: string;
}

export interface DiffuseRequest {
  target: string;
  context: string;
  crop: [number, number, number, number];
  paste?: [number, number];
  feather?: number;
  params?: InversionParams;
  checkpoint?: string;
}
