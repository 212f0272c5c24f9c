// Frozen backbone wrapper: tokenizer plus encoder behind a two-method
// surface (hidden size, embed one text). Inference is pinned to CPU,
// fp32, single-threaded ONNX sessions so repeated runs over the same
// checkpoint produce identical bytes.

import { env, AutoTokenizer, AutoModel } from "@huggingface/transformers";

export class BackboneError extends Error {}

export interface BackboneOptions {
  // Directory holding checkpoints by model id. When set, loading is
  // strictly offline: nothing is fetched from a hub.
  localRoot?: string;
}

export interface Embedding {
  // row-major (tokens, hiddenSize)
  data: Float32Array;
  tokens: number;
  hiddenSize: number;
}

const HIDDEN_SIZE_KEYS = ["dim", "hidden_size", "d_model", "n_embd"] as const;

export class Backbone {
  readonly modelId: string;
  readonly hiddenSize: number;
  private readonly tokenizer: any;
  private readonly model: any;

  private constructor(modelId: string, tokenizer: any, model: any, hiddenSize: number) {
    this.modelId = modelId;
    this.tokenizer = tokenizer;
    this.model = model;
    this.hiddenSize = hiddenSize;
  }

  static async load(modelId: string, options: BackboneOptions = {}): Promise<Backbone> {
    if (options.localRoot !== undefined) {
      env.localModelPath = options.localRoot;
      env.allowRemoteModels = false;
    }
    let tokenizer: any;
    let model: any;
    try {
      tokenizer = await AutoTokenizer.from_pretrained(modelId);
      model = await AutoModel.from_pretrained(modelId, {
        device: "cpu",
        dtype: "fp32",
        session_options: { intraOpNumThreads: 1, interOpNumThreads: 1 },
      });
    } catch (err) {
      throw new BackboneError(`failed to load '${modelId}': ${(err as Error).message}`);
    }
    const config = model.config as Record<string, unknown>;
    let hiddenSize: number | undefined;
    for (const key of HIDDEN_SIZE_KEYS) {
      const value = config[key];
      if (typeof value === "number" && Number.isInteger(value) && value > 0) {
        hiddenSize = value;
        break;
      }
    }
    if (hiddenSize === undefined) {
      throw new BackboneError(
        `config for '${modelId}' exposes none of ${HIDDEN_SIZE_KEYS.join(", ")}`,
      );
    }
    return new Backbone(modelId, tokenizer, model, hiddenSize);
  }

  // Final-layer state for every token of one text. maxLen truncates the
  // token sequence; undefined keeps the tokenizer's own limit.
  async embed(text: string, maxLen?: number): Promise<Embedding> {
    const encodeOptions: Record<string, unknown> = {};
    if (maxLen !== undefined) {
      encodeOptions.truncation = true;
      encodeOptions.max_length = maxLen;
    }
    const encoded = this.tokenizer(text, encodeOptions);
    const output = await this.model(encoded);
    const hidden = output.last_hidden_state;
    if (hidden === undefined) {
      throw new BackboneError(`model '${this.modelId}' returned no last_hidden_state`);
    }
    const dims: number[] = hidden.dims;
    if (dims.length !== 3 || dims[0] !== 1) {
      throw new BackboneError(`unexpected hidden-state shape [${dims.join(", ")}]`);
    }
    const [, tokens, width] = dims;
    if (tokens === 0) {
      throw new BackboneError("text produced no tokens");
    }
    if (width !== this.hiddenSize) {
      throw new BackboneError(
        `hidden width ${width} does not match config hidden size ${this.hiddenSize}`,
      );
    }
    return {
      data: new Float32Array(hidden.data as Float32Array),
      tokens,
      hiddenSize: width,
    };
  }
}
