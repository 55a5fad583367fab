//! Image loading (PGM canonical, greyscale PNG as a convenience) and dataset
//! directories.
//!
//! A dataset directory holds `img_<id>.pgm` / `msk_<id>.pgm` pairs, as written
//! by the `phantom` command. Pairs are ordered by id; the train/test split is
//! by position parity in that order (even positions train).

use std::fs::File;
use std::path::{Path, PathBuf};

use elastic_seg::pgm::Pgm;
use elastic_seg::{BinaryMask, ScalarField2D};

use crate::CliError;

fn is_png(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png"))
}

fn read_png(path: &Path) -> Result<Pgm, CliError> {
    let bad = |reason: String| CliError::Input(format!("{}: {reason}", path.display()));
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut decoder = png::Decoder::new(std::io::BufReader::new(file));
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder.read_info().map_err(|e| bad(e.to_string()))?;
    let mut buf = vec![0; reader.output_buffer_size().ok_or_else(|| bad("image too large".into()))?];
    let info = reader.next_frame(&mut buf).map_err(|e| bad(e.to_string()))?;
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        other => return Err(bad(format!("expected a greyscale PNG, found {other:?}"))),
    };
    let (width, height) = (info.width as usize, info.height as usize);
    let bytes = &buf[..info.buffer_size()];
    let (maxval, samples) = match info.bit_depth {
        png::BitDepth::Sixteen => (
            65535,
            bytes.chunks_exact(2 * channels).map(|c| u16::from_be_bytes([c[0], c[1]])).collect(),
        ),
        png::BitDepth::Eight => (255, bytes.chunks_exact(channels).map(|c| u16::from(c[0])).collect()),
        other => return Err(bad(format!("unsupported bit depth {other:?}"))),
    };
    Ok(Pgm {
        width,
        height,
        maxval,
        samples,
    })
}

fn read_raw(path: &Path) -> Result<Pgm, CliError> {
    if is_png(path) {
        read_png(path)
    } else {
        Pgm::read(path).map_err(|e| CliError::from_core(e, path))
    }
}

pub fn read_field(path: &Path) -> Result<ScalarField2D, CliError> {
    read_raw(path)?.to_field().map_err(|e| CliError::from_core(e, path))
}

pub fn read_mask(path: &Path) -> Result<BinaryMask, CliError> {
    read_raw(path)?.to_mask().map_err(|e| CliError::from_core(e, path))
}

pub fn write_pgm(path: &Path, pgm: &Pgm) -> Result<(), CliError> {
    std::fs::write(path, pgm.encode()).map_err(|e| CliError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

#[derive(Debug, Clone)]
pub struct Sample {
    pub id: String,
    pub image: ScalarField2D,
    pub mask: BinaryMask,
}

/// Which part of a dataset directory to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Split {
    Train,
    Test,
    All,
}

impl Split {
    fn keeps(self, position: usize) -> bool {
        match self {
            Self::Train => position.is_multiple_of(2),
            Self::Test => position % 2 == 1,
            Self::All => true,
        }
    }
}

/// `(id, image path, mask path)` for every complete pair, ordered by id.
pub fn list_pairs(dir: &Path) -> Result<Vec<(String, PathBuf, PathBuf)>, CliError> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut pairs = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        let Some(rest) = name.strip_prefix("img_") else {
            continue;
        };
        let Some((id, ext)) = rest.rsplit_once('.') else {
            continue;
        };
        if !(ext.eq_ignore_ascii_case("pgm") || ext.eq_ignore_ascii_case("png")) {
            continue;
        }
        let mask = ["pgm", "png"]
            .iter()
            .map(|e| dir.join(format!("msk_{id}.{e}")))
            .find(|p| p.is_file())
            .ok_or_else(|| CliError::Input(format!("{}: no mask msk_{id}.pgm for {name}", dir.display())))?;
        pairs.push((id.to_string(), path, mask));
    }
    pairs.sort_by(|a, b| a.0.cmp(&b.0));
    if pairs.is_empty() {
        return Err(CliError::Input(format!("{}: no img_*.pgm files found", dir.display())));
    }
    Ok(pairs)
}

pub fn load_dataset(dir: &Path, split: Split) -> Result<Vec<Sample>, CliError> {
    let pairs = list_pairs(dir)?;
    let mut out = Vec::new();
    for (pos, (id, img, msk)) in pairs.into_iter().enumerate() {
        if !split.keeps(pos) {
            continue;
        }
        let image = read_field(&img)?;
        let mask = read_mask(&msk)?;
        if image.width() != mask.width() || image.height() != mask.height() {
            return Err(CliError::Input(format!("{id}: image and mask sizes differ")));
        }
        out.push(Sample { id, image, mask });
    }
    if out.is_empty() {
        return Err(CliError::Input(format!("{}: split {split:?} is empty", dir.display())));
    }
    Ok(out)
}
