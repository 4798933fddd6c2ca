/* tslint:disable */
/* eslint-disable */

export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    checkFraming(image: Uint8Array): string;
    compareGlyphs(id_a: number, var_a: number, id_b: number, var_b: number): string;
    static glyphCanvas(): number;
    modelBytes(): Uint8Array;
    /**
     * Pass the bytes of a `detector.bin`, or nothing to train in the page.
     */
    constructor(model?: Uint8Array | null);
    renderGlyph(identity: number, variant: number): Uint8Array;
}

export class GateResult {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Duration and levels as JSON.
     */
    summary(): string;
    /**
     * Gated clip as a canonical WAV.
     */
    wav(): Uint8Array;
}

export function gateWav(wav: Uint8Array): GateResult;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly __wbg_gateresult_free: (a: number, b: number) => void;
    readonly demo_checkFraming: (a: number, b: number, c: number) => [number, number, number, number];
    readonly demo_compareGlyphs: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly demo_glyphCanvas: () => number;
    readonly demo_modelBytes: (a: number) => [number, number];
    readonly demo_new: (a: number, b: number) => [number, number, number];
    readonly demo_renderGlyph: (a: number, b: number, c: number) => [number, number, number, number];
    readonly gateWav: (a: number, b: number) => [number, number, number];
    readonly gateresult_summary: (a: number) => [number, number, number, number];
    readonly gateresult_wav: (a: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
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
