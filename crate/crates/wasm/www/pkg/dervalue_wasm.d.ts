/* tslint:disable */
/* eslint-disable */

/**
 * Value of coordination in the two-type model, `steps + 1` points over
 * adoption fractions 0..=1.
 */
export function analytic_curve(e: number, pa: number, q: number, r: number, n: number, steps: number): string;

/**
 * Optimal battery schedule for one day, starting empty. `load` and `pv`
 * are 24 hourly kWh values; `pv` is on the DC side of the inverter.
 */
export function dispatch_day(load: Float64Array, pv: Float64Array, buy: Float64Array, sell: Float64Array, pv_kw: number): string;

/**
 * Retail and flipped time-of-use prices, $/kWh, for day `index` of the
 * study year beginning 2011-11-01.
 */
export function tariff_day(index: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly analytic_curve: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly dispatch_day: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number) => [number, number, number, number];
    readonly tariff_day: (a: number) => [number, number, number, number];
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
