//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any
//! failure.

mod criteria;
mod facade;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use mfrs_core::eval::reference_detector;
use mfrs_core::vision::{DetectorConfig, DetectorModel};

pub struct Shared {
    pub model: DetectorModel,
    pub config: DetectorConfig,
}

type Check = fn(&Shared) -> Result<String, String>;

fn main() {
    let config = DetectorConfig::default();
    let model = reference_detector(&config).expect("reference detector trains");
    let shared = Shared { model, config };

    let checks: [(u32, &str, Check); 12] = [
        (1, "encoding contract", criteria::encoding_contract),
        (2, "compare_faces oracle", criteria::compare_faces_oracle),
        (3, "NMS oracle", criteria::nms_oracle),
        (4, "glyph detection", criteria::glyph_detection),
        (5, "identity separation and recognition", criteria::identity_separation),
        (6, "WAV bit-exactness", criteria::wav_bit_exact),
        (7, "noise gate", criteria::noise_gate_levels),
        (8, "store crash safety", criteria::store_crash_safety),
        (9, "DB stress", criteria::db_stress),
        (10, "memo association window", criteria::memo_association),
        (11, "eval harness", criteria::eval_harness),
        (12, "facade equivalence", facade::facade_equivalence),
    ];

    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (n, title, check) in checks {
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(|| check(&shared)))
            .unwrap_or_else(|p| Err(format!("panicked: {}", panic_text(&p))));
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS criterion {n:>2} ({title}): {detail} [{secs:.1} s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {n:>2} ({title}): {detail} [{secs:.1} s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion/criteria failed");
        std::process::exit(1);
    }
}

fn panic_text(p: &Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<String>()
        .cloned()
        .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_else(|| "non-string panic".into())
}

/// `Err(message)` unless `cond`.
pub fn ensure(cond: bool, message: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(message())
    }
}
