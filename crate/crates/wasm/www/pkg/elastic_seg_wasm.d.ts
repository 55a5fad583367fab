/* tslint:disable */
/* eslint-disable */

/**
 * Energy and force map (`-dE/dP`, red pulls probability up) for a disc pair.
 */
export class DiscPair {
    free(): void;
    [Symbol.dispose](): void;
    forceRgba(): Uint8Array;
    constructor(size: number, radius: number, offset: number, alpha: number);
    readonly energy: number;
}

/**
 * Interactive projected gradient flow toward a target mask.
 */
export class Evolution {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Energy before the first step and after each step so far.
     */
    energies(): Float64Array;
    /**
     * IoU of `P >= 0.5` with the target.
     */
    iou(): number;
    constructor(size: number, target: string, init: string, shift: number, alpha: number, eta: number);
    /**
     * Probability map in grey with the target outline in red.
     */
    rgba(): Uint8Array;
    /**
     * Runs `n` steps and returns the energy afterwards.
     */
    step(n: number): number;
    readonly energy: number;
    readonly steps: number;
}

/**
 * A generated phantom.
 */
export class PhantomView {
    free(): void;
    [Symbol.dispose](): void;
    imageRgba(): Uint8Array;
    maskRgba(): Uint8Array;
    constructor(size: number, seed: number, contrast: number, noise: number, branches: number);
    /**
     * The image with the vessel outline drawn in.
     */
    overlayRgba(): Uint8Array;
    readonly foregroundFraction: number;
    readonly size: number;
}

/**
 * Energy of the disc pair at offsets `0, 1, ..., max_offset`.
 */
export function energyCurve(size: number, radius: number, alpha: number, max_offset: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_discpair_free: (a: number, b: number) => void;
    readonly __wbg_evolution_free: (a: number, b: number) => void;
    readonly __wbg_phantomview_free: (a: number, b: number) => void;
    readonly discpair_energy: (a: number) => number;
    readonly discpair_forceRgba: (a: number) => [number, number];
    readonly discpair_new: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly energyCurve: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly evolution_energies: (a: number) => [number, number];
    readonly evolution_energy: (a: number) => number;
    readonly evolution_iou: (a: number) => number;
    readonly evolution_new: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number];
    readonly evolution_rgba: (a: number) => [number, number];
    readonly evolution_step: (a: number, b: number) => [number, number, number];
    readonly evolution_steps: (a: number) => number;
    readonly phantomview_foregroundFraction: (a: number) => number;
    readonly phantomview_imageRgba: (a: number) => [number, number];
    readonly phantomview_maskRgba: (a: number) => [number, number];
    readonly phantomview_new: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly phantomview_overlayRgba: (a: number) => [number, number];
    readonly phantomview_size: (a: number) => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_table_dealloc: (a: number) => void;
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
