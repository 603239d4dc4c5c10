/* tslint:disable */
/* eslint-disable */

/**
 * A synthetic textured scene to play with when no image is loaded.
 */
export function demo_image(size: number, seed: bigint): Uint8Array;

/**
 * Explanation heatmap of the built-in quadrant classifier.
 */
export function explain_heatmap(rgba: Uint8Array, width: number, height: number, n_segments: number, n_samples: number, sampler: string, distance: string, seed: bigint): Uint8Array;

/**
 * Two-moons plot of one query's neighbourhood drawn through a quantile
 * transform with `n_quantiles` knots, over a small forest's probability
 * field, with the fitted surrogate's 0.5 level line.
 */
export function quantile_neighbourhood(n_quantiles: number, query_index: number, size: number, seed: bigint): Uint8Array;

/**
 * One random neighbour of the image: about half of the SLIC superpixels are
 * ablated with `sampler` (e.g. `mean`, `blur@5`), boundaries drawn in red.
 */
export function sample_preview(rgba: Uint8Array, width: number, height: number, n_segments: number, sampler: string, seed: bigint): Uint8Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly demo_image: (a: number, b: bigint) => [number, number];
    readonly explain_heatmap: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number, j: number, k: bigint) => [number, number, number, number];
    readonly quantile_neighbourhood: (a: number, b: number, c: number, d: bigint) => [number, number, number, number];
    readonly sample_preview: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: bigint) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
