use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use mfrs_core::engine::{Engine, EngineConfig};
use mfrs_core::eval::audio::{db_change, region_rms, tone_bursts};
use mfrs_core::eval::storecheck::{crash_check, random_script};
use mfrs_core::eval::{
    bench_db, detection_benchmark, eval_pairs, generate_face_glyph, identity_benchmark, parse_pairs, sweep,
    GlyphParams, EVAL_JITTER_BASE,
};
use mfrs_core::ingestion::{encode_pnm, load_image_path};
use mfrs_core::memo::{noise_gate, read_wav, write_wav, AudioClip, CaptureContext, GatePolicy};
use mfrs_core::rng::SplitMix64;
use mfrs_core::store::{ManualClock, NewPerson, Store, StoreOptions};
use mfrs_core::vision::{
    compare_faces, detect_faces, encode_face, iou, nms, BoundingBox, Channels, FaceEncoding, Image, MatchConfig,
    ENCODING_DIM,
};

use crate::{ensure, Shared};

fn random_crop(rng: &mut SplitMix64, i: u64) -> (Image, BoundingBox) {
    if i.is_multiple_of(2) {
        let (img, truth) = generate_face_glyph(&GlyphParams::new(rng.below(1000), 90_000 + i)).unwrap();
        let jitter = |v: u32, rng: &mut SplitMix64| (v as i64 + rng.below(9) as i64 - 4).max(0) as u32;
        let (w, h) = (img.width(), img.height());
        let mut b = BoundingBox::new(
            jitter(truth.top, rng),
            jitter(truth.right, rng).min(w),
            jitter(truth.bottom, rng).min(h),
            jitter(truth.left, rng),
        );
        if b.is_degenerate() {
            b = truth;
        }
        (img, b)
    } else {
        let w = 24 + rng.below(280) as u32;
        let h = 24 + rng.below(280) as u32;
        let channels = if rng.below(2) == 0 { Channels::Gray } else { Channels::Rgb };
        let px = (0..w as usize * h as usize * channels.count()).map(|_| rng.below(256) as u8).collect();
        let img = Image::new(w, h, channels, px).unwrap();
        let bw = 16 + rng.below((w - 16) as u64 + 1) as u32;
        let bh = 16 + rng.below((h - 16) as u64 + 1) as u32;
        let left = rng.below((w - bw) as u64 + 1) as u32;
        let top = rng.below((h - bh) as u64 + 1) as u32;
        (img, BoundingBox::new(top, left + bw, top + bh, left))
    }
}

fn encoding_bits(e: &FaceEncoding) -> Vec<u64> {
    e.values().iter().map(|v| v.to_bits()).collect()
}

pub fn encoding_contract(s: &Shared) -> Result<String, String> {
    let start = Instant::now();
    let run = || -> Result<Vec<Vec<u64>>, String> {
        let mut rng = SplitMix64::new(0xE11C_0DE5);
        let mut all = Vec::with_capacity(1000);
        for i in 0..1000u64 {
            let (img, b) = random_crop(&mut rng, i);
            let e = encode_face(&img, &b, &s.config).map_err(|e| format!("crop {i} ({b:?}): {e}"))?;
            ensure(e.values().len() == ENCODING_DIM, || format!("crop {i}: length {}", e.values().len()))?;
            ensure((e.norm() - 1.0).abs() <= 1e-6, || format!("crop {i}: norm {}", e.norm()))?;
            let again = encode_face(&img, &b, &s.config).map_err(|e| e.to_string())?;
            ensure(encoding_bits(&e) == encoding_bits(&again), || format!("crop {i}: not bit-stable"))?;
            all.push(encoding_bits(&e));
        }
        Ok(all)
    };
    let first = run()?;
    let second = run()?;
    ensure(first == second, || "second run differs".into())?;
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 30.0, || format!("took {secs:.1} s"))?;
    Ok(format!("1000 crops x2 runs, len 128, |norm-1| <= 1e-6, bit-identical, {secs:.1} s"))
}

fn random_unit(rng: &mut SplitMix64) -> FaceEncoding {
    FaceEncoding::normalized((0..ENCODING_DIM).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap()
}

fn brute_distance(a: &FaceEncoding, b: &FaceEncoding) -> f64 {
    let mut sum = 0.0;
    for i in 0..ENCODING_DIM {
        let d = a.values()[i] - b.values()[i];
        sum += d * d;
    }
    sum.sqrt()
}

pub fn compare_faces_oracle(_: &Shared) -> Result<String, String> {
    let mut rng = SplitMix64::new(0x0C0F_ACE5);
    let mut comparisons = 0;
    for case in 0..1000 {
        let n = rng.below(25) as usize;
        let candidate = random_unit(&mut rng);
        let mut known: Vec<FaceEncoding> = (0..n).map(|_| random_unit(&mut rng)).collect();
        if n > 0 && rng.below(4) == 0 {
            known[0] = candidate.clone();
        }
        let tolerance = match rng.below(4) {
            0 => 0.0,
            1 if n > 0 => brute_distance(&known[rng.below(n as u64) as usize], &candidate),
            _ => rng.uniform(0.0, 2.0),
        };
        let got = compare_faces(&known, &candidate, &MatchConfig::new(tolerance).unwrap()).map_err(|e| e.to_string())?;
        let want: Vec<bool> = known.iter().map(|k| brute_distance(k, &candidate) <= tolerance).collect();
        ensure(got == want, || format!("case {case}: {got:?} != {want:?} at tolerance {tolerance}"))?;
        comparisons += n;
    }
    // Distance exactly at tolerance counts as a match.
    let a = random_unit(&mut rng);
    let b = random_unit(&mut rng);
    let d = brute_distance(&a, &b);
    let at = compare_faces(std::slice::from_ref(&a), &b, &MatchConfig::new(d).unwrap()).map_err(|e| e.to_string())?;
    ensure(at == vec![true], || format!("distance == tolerance gave {at:?}"))?;
    let below = compare_faces(&[a], &b, &MatchConfig::new(d.next_down()).unwrap()).map_err(|e| e.to_string())?;
    ensure(below == vec![false], || "tolerance one ulp below distance matched".into())?;
    Ok(format!("1000 cases, {comparisons} comparisons equal brute force; boundary distance == tolerance is true"))
}

/// Repeatedly take the best remaining box (score, then top, left, index)
/// and discard everything overlapping it by more than the threshold.
fn nms_oracle_scan(boxes: &[BoundingBox], scores: &[f64], threshold: f64) -> Vec<BoundingBox> {
    let mut alive: Vec<bool> = vec![true; boxes.len()];
    let mut kept = Vec::new();
    loop {
        let mut best: Option<usize> = None;
        for i in 0..boxes.len() {
            if !alive[i] {
                continue;
            }
            best = match best {
                None => Some(i),
                Some(j) => {
                    let better = scores[i] > scores[j]
                        || (scores[i] == scores[j] && (boxes[i].top, boxes[i].left) < (boxes[j].top, boxes[j].left));
                    Some(if better { i } else { j })
                }
            };
        }
        let Some(b) = best else { break };
        kept.push(boxes[b]);
        for i in 0..boxes.len() {
            if alive[i] && iou(&boxes[i], &boxes[b]) > threshold {
                alive[i] = false;
            }
        }
        alive[b] = false;
    }
    kept
}

pub fn nms_oracle(_: &Shared) -> Result<String, String> {
    let mut rng = SplitMix64::new(0x4E45_0003);
    let mut total = 0;
    for trial in 0..500 {
        let n = rng.below(13) as usize;
        let mut boxes = Vec::with_capacity(n);
        let mut scores = Vec::with_capacity(n);
        for _ in 0..n {
            let left = rng.below(40) as u32;
            let top = rng.below(40) as u32;
            let w = 1 + rng.below(30) as u32;
            let h = 1 + rng.below(30) as u32;
            boxes.push(BoundingBox::new(top, left + w, top + h, left));
            // Coarse scores so ties occur.
            scores.push(rng.below(6) as f64 / 2.0);
        }
        if n > 1 && rng.below(5) == 0 {
            boxes[1] = boxes[0];
        }
        let threshold = [0.0, 0.3, 0.5, 0.7, 1.0][rng.below(5) as usize];
        let got = nms(&boxes, &scores, threshold).map_err(|e| e.to_string())?;
        let want = nms_oracle_scan(&boxes, &scores, threshold);
        ensure(got == want, || format!("trial {trial}: {got:?} != {want:?}"))?;
        total += n;
    }
    Ok(format!("500 trials, {total} boxes, greedy output equals quadratic scan"))
}

pub fn glyph_detection(s: &Shared) -> Result<String, String> {
    let r = detection_benchmark(&s.model, &s.config, 100, 100).map_err(|e| e.to_string())?;
    let summary = format!(
        "recall {:.2}, {:.2} false positives/image, mean {:.0} ms, max {:.0} ms per 256x256 image",
        r.recall, r.false_positives_per_image, r.mean_ms_per_image, r.max_ms_per_image
    );
    ensure(r.recall >= 0.90, || summary.clone())?;
    ensure(r.false_positives_per_image <= 0.2, || summary.clone())?;
    ensure(r.max_ms_per_image < 1000.0, || summary.clone())?;
    Ok(summary)
}

pub fn identity_separation(s: &Shared) -> Result<String, String> {
    let start = Instant::now();
    let r = identity_benchmark(&s.model, &s.config, &MatchConfig::default(), 10, 10, 5).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let summary = format!(
        "top-1 {}/{} = {:.2}, intra {:.3} < inter {:.3}, {secs:.1} s",
        r.correct, r.probes, r.top1_accuracy, r.mean_intra_distance, r.mean_inter_distance
    );
    ensure(r.probes == 50, || summary.clone())?;
    ensure(r.top1_accuracy >= 0.80, || summary.clone())?;
    ensure(r.mean_intra_distance < r.mean_inter_distance, || summary.clone())?;
    ensure(secs < 120.0, || summary.clone())?;
    Ok(summary)
}

pub fn wav_bit_exact(_: &Shared) -> Result<String, String> {
    let golden_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data/golden_1s.wav");
    let golden = std::fs::read(&golden_path).map_err(|e| format!("{}: {e}", golden_path.display()))?;
    let clip = AudioClip::new((0..16000u32).map(|i| ((i * 7919) % 65536) as i32 - 32768).map(|v| v as i16).collect());
    let bytes = write_wav(&clip);
    ensure(bytes == golden, || "writer output differs from golden file".into())?;
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    ensure(&bytes[0..4] == b"RIFF" && u32_at(4) == 32036, || format!("RIFF size {}", u32_at(4)))?;
    ensure(&bytes[36..40] == b"data" && u32_at(40) == 32000, || format!("data size {}", u32_at(40)))?;
    let mut rng = SplitMix64::new(0x3A7E);
    for i in 0..100 {
        let n = rng.below(20_000) as usize + 1;
        let clip = AudioClip::new((0..n).map(|_| rng.next_u64() as i16).collect());
        let back = read_wav(&write_wav(&clip)).map_err(|e| format!("clip {i}: {e}"))?;
        ensure(back == clip, || format!("clip {i} ({n} samples) did not roundtrip"))?;
    }
    Ok("golden 1 s file matches (RIFF 32036, data 32000); 100 random clips roundtrip".into())
}

pub fn noise_gate_levels(_: &Shared) -> Result<String, String> {
    let policy = GatePolicy::default();
    let mut worst_silent = f64::NEG_INFINITY;
    let mut worst_tone: f64 = 0.0;
    for seed in 0..5 {
        let f = tone_bursts(seed);
        let out = noise_gate(&f.clip, &policy).map_err(|e| e.to_string())?;
        let silent = db_change(
            region_rms(f.clip.samples(), &f.silent_regions),
            region_rms(out.samples(), &f.silent_regions),
        );
        let tone = db_change(
            region_rms(f.clip.samples(), &f.tone_regions),
            region_rms(out.samples(), &f.tone_regions),
        );
        worst_silent = worst_silent.max(silent);
        worst_tone = if tone.abs() > worst_tone.abs() { tone } else { worst_tone };
    }
    ensure(worst_silent <= -6.0, || format!("silent regions changed by {worst_silent:.2} dB"))?;
    ensure(worst_tone.abs() <= 1.0, || format!("tone regions changed by {worst_tone:.2} dB"))?;
    let zeros = noise_gate(&AudioClip::new(vec![0; 16000]), &policy).map_err(|e| e.to_string())?;
    ensure(zeros.samples().iter().all(|&v| v == 0), || "all-zero input produced non-zero output".into())?;
    Ok(format!(
        "5 fixtures: silence {worst_silent:.1} dB (worst), tone {worst_tone:+.2} dB (worst); zeros stay zero"
    ))
}

pub fn store_crash_safety(_: &Shared) -> Result<String, String> {
    let (mut committed, mut transactions, mut offsets) = (0, 0, 0);
    for i in 0..1000u64 {
        let script = random_script(0x5EED_0000 + i, 12);
        let r = crash_check(&script).map_err(|e| format!("script {i}: {e}"))?;
        committed += r.committed;
        transactions += r.transactions;
        offsets += r.offsets_checked;
    }
    ensure(committed > 0 && committed < transactions, || {
        format!("degenerate scripts: {committed}/{transactions} committed")
    })?;
    Ok(format!(
        "1000 sequences, {committed}/{transactions} transactions committed, {offsets} crash offsets recovered to a committed prefix with integrity"
    ))
}

fn nearest_rank_oracle(samples: &[f64], p: f64) -> f64 {
    let mut v = samples.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = (p / 100.0 * v.len() as f64).ceil() as usize;
    v[k.max(1) - 1]
}

pub fn db_stress(_: &Shared) -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let store = Store::open(dir.path(), StoreOptions::default()).map_err(|e| e.to_string())?;
    let r = bench_db(10_000, &store, 9).map_err(|e| e.to_string())?;
    for (name, s) in [("insert", &r.insert), ("get", &r.get), ("update", &r.update)] {
        ensure(s.samples_us.len() == 10_000, || format!("{name}: {} samples", s.samples_us.len()))?;
        for (p, got) in [(50.0, s.p50_us), (95.0, s.p95_us), (99.0, s.p99_us)] {
            let want = nearest_rank_oracle(&s.samples_us, p);
            ensure(got == want, || format!("{name} p{p}: {got} != oracle {want}"))?;
        }
    }
    ensure(r.get.p50_us < 1000.0, || format!("get p50 {} us", r.get.p50_us))?;
    ensure(store.list_persons().len() == 10_000, || "store does not hold 10000 persons".into())?;
    Ok(format!(
        "n=10000 on a fsync'd disk store in {:.1} s; p50 insert {:.0} us, get {:.1} us, update {:.0} us; percentiles equal sort oracle",
        r.total_ms / 1e3,
        r.insert.p50_us,
        r.get.p50_us,
        r.update.p50_us
    ))
}

pub fn memo_association(s: &Shared) -> Result<String, String> {
    let clock = ManualClock::new("2024-05-01T09:00:00Z".parse().unwrap());
    let store = Arc::new(Store::in_memory(StoreOptions::default().with_clock(clock.clone())));
    let config = EngineConfig {
        association_window_s: 90.0,
        ..EngineConfig::default()
    };
    let engine = Engine::new(store.clone(), Arc::new(s.model.clone()), config).map_err(|e| e.to_string())?;
    let params = GlyphParams::new(8, EVAL_JITTER_BASE + 800).placed((0.5, 0.5), 0.4);
    let photo = encode_pnm(&generate_face_glyph(&params).unwrap().0);
    let mut ctx = CaptureContext::new(90.0).unwrap();
    let person = engine
        .enroll_new(NewPerson::new("Dee"), &photo, false, &mut ctx)
        .map_err(|e| e.to_string())?
        .person
        .person_id;
    let wav = write_wav(&AudioClip::new((0..4000).map(|i| ((i % 50) * 300) as i16).collect()));

    clock.advance_secs(89);
    let inside = engine.add_memo_wav(&wav, None, "inside", &ctx).map_err(|e| e.to_string())?;
    ensure(inside.person_id == Some(person), || format!("memo at window-1 s: {:?}", inside.person_id))?;
    clock.advance_secs(2);
    let outside = engine.add_memo_wav(&wav, None, "outside", &ctx).map_err(|e| e.to_string())?;
    ensure(outside.person_id.is_none(), || format!("memo at window+1 s: {:?}", outside.person_id))?;

    let unlinked = store.unlinked_memos();
    ensure(unlinked.len() == 1 && unlinked[0].memo_id == outside.memo_id, || format!("unlinked {unlinked:?}"))?;
    ensure(store.get_memo(outside.memo_id).is_ok(), || "unlinked memo not retrievable".into())?;
    let linked = store.link_memo(outside.memo_id, person).map_err(|e| e.to_string())?;
    ensure(linked.person_id == Some(person), || "manual link failed".into())?;
    ensure(store.unlinked_memos().is_empty(), || "memo still unlinked".into())?;
    ensure(store.memos_for(person).map_err(|e| e.to_string())?.len() == 2, || "person lacks memos".into())?;
    Ok("window 90 s: memo at 89 s links, at 91 s stays unlinked, is retrievable and manually linkable".into())
}

pub fn eval_harness(s: &Shared) -> Result<String, String> {
    // Hand-built distances: accuracy 1 for any t in [0.35, 0.6).
    let (roc, best, acc) = sweep(&[(0.2, true), (0.35, true), (0.6, false), (0.9, false)]);
    ensure(acc == 1.0 && (0.35..0.6).contains(&best), || format!("sweep gave acc {acc}, t {best}"))?;
    ensure(roc.len() == 4, || format!("{} ROC points", roc.len()))?;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut names = Vec::new();
    for id in 0..6u64 {
        for j in 0..4u64 {
            let (img, _) = generate_face_glyph(&GlyphParams::new(id, 3000 + 10 * id + j)).unwrap();
            let name = format!("id{id}_{j}.pgm");
            std::fs::write(dir.path().join(&name), encode_pnm(&img)).unwrap();
            names.push((name, id));
        }
    }
    let encode = |p: &Path| {
        let img = load_image_path(p).unwrap();
        detect_faces(&img, &s.model, &s.config)
            .unwrap()
            .first()
            .map(|b| encode_face(&img, b, &s.config).unwrap())
    };

    // Hand-built 4-pair image case; the derived interval is
    // [largest same distance, smallest diff distance).
    let four = "id0_0.pgm id0_1.pgm same\nid1_0.pgm id1_2.pgm same\nid0_0.pgm id3_0.pgm diff\nid2_0.pgm id4_1.pgm diff\n";
    let list = parse_pairs(four, dir.path()).map_err(|e| e.to_string())?;
    let report = eval_pairs(&list, &s.model, &s.config).map_err(|e| e.to_string())?;
    let dist = |e: &mfrs_core::eval::PairEntry| {
        brute_distance(&encode(&e.a).unwrap(), &encode(&e.b).unwrap())
    };
    let hi_same = list.entries.iter().filter(|e| e.same).map(dist).fold(0.0, f64::max);
    let lo_diff = list.entries.iter().filter(|e| !e.same).map(dist).fold(f64::INFINITY, f64::min);
    ensure(report.accuracy == 1.0, || format!("4-pair accuracy {}", report.accuracy))?;
    let four_threshold = report.best_threshold;
    ensure(hi_same <= report.best_threshold && report.best_threshold < lo_diff, || {
        format!("best threshold {} outside [{hi_same}, {lo_diff})", report.best_threshold)
    })?;

    // 50 random pairs against a full recount.
    let mut rng = SplitMix64::new(0xFA1);
    let mut text = String::new();
    for _ in 0..50 {
        let (a, ia) = &names[rng.below(names.len() as u64) as usize];
        let (b, ib) = &names[rng.below(names.len() as u64) as usize];
        text.push_str(&format!("{a} {b} {}\n", if ia == ib { "same" } else { "diff" }));
    }
    let list = parse_pairs(&text, dir.path()).map_err(|e| e.to_string())?;
    let report = eval_pairs(&list, &s.model, &s.config).map_err(|e| e.to_string())?;
    let mut scored = Vec::new();
    for e in &list.entries {
        if let (Some(x), Some(y)) = (encode(&e.a), encode(&e.b)) {
            scored.push((brute_distance(&x, &y), e.same));
        }
    }
    ensure(report.n_pairs == scored.len(), || format!("n_pairs {} vs {}", report.n_pairs, scored.len()))?;
    ensure(report.skipped_pairs == 50 - scored.len(), || "skipped count differs".into())?;
    let n_same = scored.iter().filter(|p| p.1).count();
    ensure(report.n_same == n_same && report.n_diff == scored.len() - n_same, || "same/diff counts differ".into())?;
    let mut ts: Vec<f64> = scored.iter().map(|p| p.0).collect();
    ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ts.dedup();
    let mut best = (-1.0, 0.0);
    for (k, &t) in ts.iter().enumerate() {
        let right = scored.iter().filter(|&&(d, same)| (same && d <= t) || (!same && d > t)).count();
        let acc = right as f64 / scored.len() as f64;
        if acc > best.0 {
            best = (acc, t);
        }
        let tp = scored.iter().filter(|&&(d, same)| same && d <= t).count() as f64;
        let fp = scored.iter().filter(|&&(d, same)| !same && d <= t).count() as f64;
        let p = &report.roc[k];
        let tpr = if n_same == 0 { 0.0 } else { tp / n_same as f64 };
        let fpr = if scored.len() == n_same { 0.0 } else { fp / (scored.len() - n_same) as f64 };
        ensure(p.threshold == t && p.tpr == tpr && p.fpr == fpr, || format!("ROC point {k}: {p:?}"))?;
    }
    ensure(report.roc.len() == ts.len(), || "ROC length differs".into())?;
    ensure(report.accuracy == best.0 && report.best_threshold == best.1, || {
        format!("report ({}, {}) vs recount {best:?}", report.accuracy, report.best_threshold)
    })?;
    for w in report.roc.windows(2) {
        ensure(w[0].tpr <= w[1].tpr && w[0].fpr <= w[1].fpr, || "ROC not monotone".into())?;
    }
    Ok(format!(
        "4-pair case accuracy 1.0, t={:.3} in [{hi_same:.3}, {lo_diff:.3}); 50-pair report (acc {:.2}) equals recount; ROC monotone",
        four_threshold, best.0
    ))
}
