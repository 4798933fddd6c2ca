//! Canonical 16 kHz mono 16-bit PCM WAV.

use super::clip::{AudioClip, SAMPLE_RATE};
use super::WavError;

const HEADER_LEN: usize = 44;
const PCM: u16 = 1;
const CHANNELS: u16 = 1;
const BITS: u16 = 16;

/// RIFF/WAVE with exactly one 16-byte `fmt ` chunk and one `data` chunk.
pub fn write_wav(clip: &AudioClip) -> Vec<u8> {
    let data_len = (clip.len() * 2) as u32;
    let block_align = CHANNELS * BITS / 8;
    let mut out = Vec::with_capacity(HEADER_LEN + data_len as usize + 1);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&PCM.to_le_bytes());
    out.extend_from_slice(&CHANNELS.to_le_bytes());
    out.extend_from_slice(&SAMPLE_RATE.to_le_bytes());
    out.extend_from_slice(&(SAMPLE_RATE * block_align as u32).to_le_bytes());
    out.extend_from_slice(&block_align.to_le_bytes());
    out.extend_from_slice(&BITS.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for s in clip.samples() {
        out.extend_from_slice(&s.to_le_bytes());
    }
    out
}

/// Decode a WAV payload, skipping chunks other than `fmt ` and `data`.
pub fn read_wav(bytes: &[u8]) -> Result<AudioClip, WavError> {
    let malformed = |m: &str| WavError::Malformed(m.to_string());
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(malformed("missing RIFF/WAVE signature"));
    }
    let mut pos = 12;
    let mut format_seen = false;
    while pos < bytes.len() {
        if bytes.len() - pos < 8 {
            return Err(malformed("truncated chunk header"));
        }
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body_start = pos + 8;
        let available = bytes.len() - body_start;
        match id {
            b"fmt " => {
                if size < 16 || available < 16 {
                    return Err(malformed("fmt chunk too short"));
                }
                check_format(&bytes[body_start..body_start + 16])?;
                format_seen = true;
            }
            b"data" => {
                if !format_seen {
                    return Err(malformed("data chunk before fmt chunk"));
                }
                if size > available {
                    return Err(WavError::Malformed(format!(
                        "data chunk declares {size} bytes, {available} present"
                    )));
                }
                if !size.is_multiple_of(2) {
                    return Err(malformed("odd data length for 16-bit samples"));
                }
                let samples = bytes[body_start..body_start + size]
                    .chunks_exact(2)
                    .map(|b| i16::from_le_bytes([b[0], b[1]]))
                    .collect();
                return Ok(AudioClip::new(samples));
            }
            _ => {}
        }
        if size > available {
            return Err(malformed("chunk extends past end of file"));
        }
        pos = body_start + size + (size & 1);
    }
    Err(malformed(if format_seen {
        "no data chunk"
    } else {
        "no fmt chunk"
    }))
}

fn check_format(fmt: &[u8]) -> Result<(), WavError> {
    let u16_at = |i: usize| u16::from_le_bytes([fmt[i], fmt[i + 1]]);
    let format = u16_at(0);
    let channels = u16_at(2);
    let rate = u32::from_le_bytes(fmt[4..8].try_into().unwrap());
    let bits = u16_at(14);
    if format != PCM {
        return Err(WavError::Unsupported(format!("format code {format}, expected PCM (1)")));
    }
    if channels != CHANNELS {
        return Err(WavError::Unsupported(format!("{channels} channels, expected mono")));
    }
    if rate != SAMPLE_RATE {
        return Err(WavError::Unsupported(format!("{rate} Hz, expected {SAMPLE_RATE} Hz")));
    }
    if bits != BITS {
        return Err(WavError::Unsupported(format!("{bits}-bit samples, expected 16-bit")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use proptest::prelude::*;

    fn u32_at(b: &[u8], i: usize) -> u32 {
        u32::from_le_bytes(b[i..i + 4].try_into().unwrap())
    }

    #[test]
    fn one_second_header() {
        let wav = write_wav(&AudioClip::new(vec![0; 16000]));
        assert_eq!(&wav[0..4], b"RIFF");
        assert_eq!(&wav[8..12], b"WAVE");
        assert_eq!(u32_at(&wav, 4), 32036);
        assert_eq!(&wav[36..40], b"data");
        assert_eq!(u32_at(&wav, 40), 32000);
        assert_eq!(wav.len(), 44 + 32000);
    }

    #[test]
    fn header_bytes_are_canonical() {
        let wav = write_wav(&AudioClip::new(vec![1, -1]));
        let expected: &[u8] = &[
            b'R', b'I', b'F', b'F', 40, 0, 0, 0, b'W', b'A', b'V', b'E', //
            b'f', b'm', b't', b' ', 16, 0, 0, 0, 1, 0, 1, 0, //
            0x80, 0x3E, 0, 0, 0, 0x7D, 0, 0, 2, 0, 16, 0, //
            b'd', b'a', b't', b'a', 4, 0, 0, 0, 1, 0, 0xFF, 0xFF,
        ];
        assert_eq!(wav, expected);
    }

    #[test]
    fn roundtrip_random_clips() {
        let mut rng = SplitMix64::new(0x57A7);
        for _ in 0..100 {
            let n = rng.below(4000) as usize;
            let clip = AudioClip::new((0..n).map(|_| rng.next_u64() as i16).collect());
            let bytes = write_wav(&clip);
            let back = read_wav(&bytes).unwrap();
            assert_eq!(back, clip);
            assert_eq!(write_wav(&back), bytes);
        }
    }

    #[test]
    fn stereo_is_unsupported() {
        let mut wav = write_wav(&AudioClip::new(vec![0; 4]));
        wav[22] = 2;
        assert!(matches!(read_wav(&wav), Err(WavError::Unsupported(_))));
    }

    #[test]
    fn other_rates_and_formats_are_unsupported() {
        let mut wav = write_wav(&AudioClip::new(vec![0; 4]));
        wav[24..28].copy_from_slice(&44100u32.to_le_bytes());
        assert!(matches!(read_wav(&wav), Err(WavError::Unsupported(_))));
        let mut wav = write_wav(&AudioClip::new(vec![0; 4]));
        wav[20] = 3;
        assert!(matches!(read_wav(&wav), Err(WavError::Unsupported(_))));
    }

    #[test]
    fn truncated_data_chunk_is_malformed() {
        let wav = write_wav(&AudioClip::new(vec![0; 16000]));
        let cut = &wav[..44 + 100];
        assert!(matches!(read_wav(cut), Err(WavError::Malformed(_))));
    }

    #[test]
    fn unknown_chunks_are_skipped() {
        let clip = AudioClip::new(vec![5, 6, 7]);
        let wav = write_wav(&clip);
        let mut patched = wav[..36].to_vec();
        patched.extend_from_slice(b"LIST");
        patched.extend_from_slice(&3u32.to_le_bytes());
        patched.extend_from_slice(&[1, 2, 3, 0]);
        patched.extend_from_slice(&wav[36..]);
        assert_eq!(read_wav(&patched).unwrap(), clip);
    }

    #[test]
    fn garbage_is_malformed() {
        assert!(matches!(read_wav(b""), Err(WavError::Malformed(_))));
        assert!(matches!(read_wav(b"RIFF\0\0\0\0WAVE"), Err(WavError::Malformed(_))));
        assert!(matches!(read_wav(b"not a wav file at all"), Err(WavError::Malformed(_))));
    }

    proptest! {
        #[test]
        fn prop_roundtrip(samples in proptest::collection::vec(any::<i16>(), 0..512)) {
            let clip = AudioClip::new(samples);
            prop_assert_eq!(read_wav(&write_wav(&clip)).unwrap(), clip);
        }
    }
}
