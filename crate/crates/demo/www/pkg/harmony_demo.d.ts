/* tslint:disable */
/* eslint-disable */

/**
 * Abort rate of each engine as the hotspot probability grows.
 */
export function hotspot_sweep(txns: number, block_size: number, seed: number): string;

/**
 * Runs one small YCSB block and returns its transactions, rw edges and
 * verdicts.
 */
export function inspect_block(engine_name: string, txns: number, keys: number, theta: number, seed: number): string;

/**
 * Abort rate of each engine at each skew level.
 */
export function theta_sweep(workload_name: string, txns: number, block_size: number, seed: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly hotspot_sweep: (a: number, b: number, c: number) => [number, number, number, number];
    readonly inspect_block: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly theta_sweep: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
