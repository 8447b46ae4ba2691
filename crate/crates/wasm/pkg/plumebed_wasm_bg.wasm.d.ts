/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_toyresult_free: (a: number, b: number) => void;
export const empirical_wasserstein: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
export const gaussian_w2: (a: number, b: number, c: number, d: number) => [number, number, number];
export const toy_point: (a: number, b: number, c: number) => [number, number, number];
export const toyresult_kl: (a: number) => number;
export const toyresult_w1: (a: number) => number;
export const toyresult_w2: (a: number) => number;
export const toyresult_weights: (a: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
