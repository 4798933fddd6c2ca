//! Train the reference detector and report detection and identity metrics
//! on the glyph corpus.

use std::time::Instant;

use mfrs_core::eval::{detection_benchmark, identity_benchmark, reference_detector};
use mfrs_core::vision::{DetectorConfig, MatchConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = DetectorConfig::default();
    let start = Instant::now();
    let model = reference_detector(&config)?;
    eprintln!("detector trained in {:.1?}", start.elapsed());

    let detection = detection_benchmark(&model, &config, 100, 100)?;
    println!("{}", serde_json::to_string_pretty(&detection)?);

    let identity = identity_benchmark(&model, &config, &MatchConfig::default(), 10, 10, 5)?;
    println!("{}", serde_json::to_string_pretty(&identity)?);
    Ok(())
}
