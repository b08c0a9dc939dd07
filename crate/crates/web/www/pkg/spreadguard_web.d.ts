/* tslint:disable */
/* eslint-disable */

/**
 * Per-node spends of the cheapest allocation reaching `eps_bar`, with
 * the node centralities for scatter plots.
 */
export function allocation(nodes: number, edges: number, seed: bigint, rho: number, eps_bar: number): string;

/**
 * Best decay rate for budgets `factor * C`, where C is the cheapest
 * cost of reaching `eps_bar`.
 */
export function tradeoff(nodes: number, edges: number, seed: bigint, rho: number, eps_bar: number, factors: Float64Array): string;

/**
 * Mean-field infection norm from every node infected with probability
 * `p0`, before and after the rate allocation.
 */
export function trajectories(nodes: number, edges: number, seed: bigint, rho: number, eps_bar: number, p0: number, t_end: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly allocation: (a: number, b: number, c: bigint, d: number, e: number) => [number, number, number, number];
    readonly tradeoff: (a: number, b: number, c: bigint, d: number, e: number, f: number, g: number) => [number, number, number, number];
    readonly trajectories: (a: number, b: number, c: bigint, d: number, e: number, f: number, g: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
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
