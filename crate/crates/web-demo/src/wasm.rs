//! JavaScript bindings. Results cross the boundary as JSON strings or bytes.

use wasm_bindgen::prelude::*;

use crate::GLYPH_CANVAS;

fn js(e: String) -> JsError {
    JsError::new(&e)
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String, JsError> {
    serde_json::to_string(value).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub struct Demo(crate::Demo);

#[wasm_bindgen]
impl Demo {
    /// Pass the bytes of a `detector.bin`, or nothing to train in the page.
    #[wasm_bindgen(constructor)]
    pub fn new(model: Option<Vec<u8>>) -> Result<Demo, JsError> {
        crate::Demo::new(model.as_deref()).map(Demo).map_err(js)
    }

    #[wasm_bindgen(js_name = modelBytes)]
    pub fn model_bytes(&self) -> Vec<u8> {
        self.0.model_bytes()
    }

    #[wasm_bindgen(js_name = glyphCanvas)]
    pub fn glyph_canvas() -> u32 {
        GLYPH_CANVAS
    }

    #[wasm_bindgen(js_name = renderGlyph)]
    pub fn render_glyph(&self, identity: u32, variant: u32) -> Result<Vec<u8>, JsError> {
        self.0.render_glyph(identity.into(), variant.into()).map_err(js)
    }

    #[wasm_bindgen(js_name = compareGlyphs)]
    pub fn compare_glyphs(&self, id_a: u32, var_a: u32, id_b: u32, var_b: u32) -> Result<String, JsError> {
        let c = self.0.compare_glyphs((id_a.into(), var_a.into()), (id_b.into(), var_b.into())).map_err(js)?;
        to_json(&c)
    }

    #[wasm_bindgen(js_name = checkFraming)]
    pub fn check_framing(&self, image: &[u8]) -> Result<String, JsError> {
        to_json(&self.0.check_framing(image).map_err(js)?)
    }
}

#[wasm_bindgen]
pub struct GateResult(crate::GateSummary);

#[wasm_bindgen]
impl GateResult {
    /// Duration and levels as JSON.
    pub fn summary(&self) -> Result<String, JsError> {
        to_json(&self.0)
    }

    /// Gated clip as a canonical WAV.
    pub fn wav(&self) -> Vec<u8> {
        self.0.wav.clone()
    }
}

#[wasm_bindgen(js_name = gateWav)]
pub fn gate_wav(wav: &[u8]) -> Result<GateResult, JsError> {
    crate::gate_wav(wav).map(GateResult).map_err(js)
}
