/* tslint:disable */
/* eslint-disable */

/**
 * Result of [`toy_point`] for JavaScript.
 */
export class ToyResult {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly kl: number;
    readonly w1: number;
    readonly w2: number;
    readonly weights: Float64Array;
}

export function empirical_wasserstein(x: string, y: string, p: number): number;

export function gaussian_w2(a: Float64Array, b: Float64Array): number;

/**
 * Ring posterior for the sensor at fraction `s` between the source and the corner.
 */
export function toy_point(s: number, n: number, kernel_width: number): ToyResult;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_toyresult_free: (a: number, b: number) => void;
    readonly empirical_wasserstein: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly gaussian_w2: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly toy_point: (a: number, b: number, c: number) => [number, number, number];
    readonly toyresult_kl: (a: number) => number;
    readonly toyresult_w1: (a: number) => number;
    readonly toyresult_w2: (a: number) => number;
    readonly toyresult_weights: (a: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
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
