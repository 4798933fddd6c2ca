//! Sequential frame feeds standing in for a camera.

use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use super::decode::{load_image_path, read_pnm};
use super::DecodeError;
use crate::vision::Image;

const EXTENSIONS: &[&str] = &["pgm", "ppm", "pnm", "png"];

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub index: u64,
    /// Where the frame came from (file path or `stream#n`).
    pub origin: String,
    pub image: Image,
}

/// Single-consumer frame feed: a directory of stills, one file, or a byte
/// stream of concatenated binary PNM images.
pub struct FrameSource {
    uri: String,
    next_index: u64,
    kind: SourceKind,
}

enum SourceKind {
    Files(std::vec::IntoIter<PathBuf>),
    Stream(Option<Box<dyn BufRead + Send>>),
}

impl FrameSource {
    /// Regular files with a recognised extension, in byte order of their names.
    pub fn directory(dir: impl AsRef<Path>) -> Result<Self, DecodeError> {
        let dir = dir.as_ref();
        let mut files = Vec::new();
        for entry in std::fs::read_dir(dir)? {
            let entry = entry?;
            if !entry.file_type()?.is_file() {
                continue;
            }
            let path = entry.path();
            let known = path
                .extension()
                .and_then(|e| e.to_str())
                .map(|e| EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
                .unwrap_or(false);
            if known {
                files.push(path);
            }
        }
        files.sort_by(|a, b| {
            a.file_name()
                .map(|n| n.as_encoded_bytes())
                .cmp(&b.file_name().map(|n| n.as_encoded_bytes()))
        });
        Ok(Self {
            uri: format!("dir:{}", dir.display()),
            next_index: 0,
            kind: SourceKind::Files(files.into_iter()),
        })
    }

    pub fn file(path: impl AsRef<Path>) -> Self {
        let path = path.as_ref().to_path_buf();
        Self {
            uri: format!("file:{}", path.display()),
            next_index: 0,
            kind: SourceKind::Files(vec![path].into_iter()),
        }
    }

    pub fn stream(reader: impl Read + Send + 'static) -> Self {
        Self {
            uri: "stream:".to_string(),
            next_index: 0,
            kind: SourceKind::Stream(Some(Box::new(BufReader::new(reader)))),
        }
    }

    pub fn uri(&self) -> &str {
        &self.uri
    }

    /// Next frame, `None` once exhausted. A frame that fails to decode yields
    /// an error and still consumes its index; directory feeds continue with
    /// the following file, streams end because framing is lost.
    pub fn next_frame(&mut self) -> Option<Result<Frame, DecodeError>> {
        let index = self.next_index;
        let result = match &mut self.kind {
            SourceKind::Files(files) => {
                let path = files.next()?;
                load_image_path(&path).map(|image| Frame {
                    index,
                    origin: path.display().to_string(),
                    image,
                })
            }
            SourceKind::Stream(slot) => {
                let reader = slot.as_mut()?;
                match reader.fill_buf() {
                    Ok([]) => {
                        *slot = None;
                        return None;
                    }
                    Ok(_) => {}
                    Err(e) => {
                        *slot = None;
                        return Some(Err(e.into()));
                    }
                }
                match read_pnm(reader) {
                    Ok(image) => Ok(Frame {
                        index,
                        origin: format!("stream#{index}"),
                        image,
                    }),
                    Err(e) => {
                        *slot = None;
                        Err(e)
                    }
                }
            }
        };
        self.next_index += 1;
        Some(result)
    }
}

impl Iterator for FrameSource {
    type Item = Result<Frame, DecodeError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_frame()
    }
}
