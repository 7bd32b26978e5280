//! Directional tiles, panorama composition, and luminosity metrics.
//!
//! Each location is covered by six 640×640 tiles at headings
//! {0, 60, 120, 180, 240, 300} with a 60° field of view and zero pitch.
//! Tiles concatenate left-to-right in ascending heading order (0° = north
//! leftmost) into one 3840×640 panorama.

use crate::geo::SamplePoint;
use image::RgbImage;
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

/// The six compass headings, ascending.
pub const HEADINGS: [u16; 6] = [0, 60, 120, 180, 240, 300];
pub const TILE_SIZE: u32 = 640;
pub const TILE_FOV_DEG: u16 = 60;
pub const TILE_PITCH_DEG: i16 = 0;
pub const PANORAMA_WIDTH: u32 = TILE_SIZE * 6;
pub const PANORAMA_HEIGHT: u32 = TILE_SIZE;

#[derive(Debug, Error)]
pub enum ImageryError {
    #[error("missing tile at heading {0}")]
    MissingHeading(u16),
    #[error("unexpected tile heading {0}")]
    UnknownHeading(u16),
    #[error("tile at heading {heading} is {w}x{h}, expected {expected}x{expected}", expected = TILE_SIZE)]
    BadTileDimensions { heading: u16, w: u32, h: u32 },
    #[error("failed to read tile {path}: {source}")]
    TileRead {
        path: String,
        #[source]
        source: image::ImageError,
    },
}

/// Request parameters for one directional tile.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TileSpec {
    pub point_id: String,
    pub heading: u16,
    pub fov: u16,
    pub pitch: i16,
    pub width: u32,
    pub height: u32,
}

/// Six directional tiles composed into one wide image.
#[derive(Debug, Clone)]
pub struct Panorama {
    pub point_id: String,
    pub image: RgbImage,
}

/// Mean perceptual brightness of one panorama, in [0, 255].
#[derive(Debug, Clone, PartialEq)]
pub struct LuminosityRecord {
    pub point_id: String,
    pub l: f64,
}

/// The six tile requests for one sample point.
pub fn tile_requests(p: &SamplePoint) -> Vec<TileSpec> {
    HEADINGS
        .iter()
        .map(|&heading| TileSpec {
            point_id: p.id.clone(),
            heading,
            fov: TILE_FOV_DEG,
            pitch: TILE_PITCH_DEG,
            width: TILE_SIZE,
            height: TILE_SIZE,
        })
        .collect()
}

/// Horizontal concatenation of the six tiles in ascending heading order.
pub fn compose_panorama(
    point_id: impl Into<String>,
    tiles: &BTreeMap<u16, RgbImage>,
) -> Result<Panorama, ImageryError> {
    for &h in tiles.keys() {
        if !HEADINGS.contains(&h) {
            return Err(ImageryError::UnknownHeading(h));
        }
    }
    let mut out = RgbImage::new(PANORAMA_WIDTH, PANORAMA_HEIGHT);
    for (slot, &heading) in HEADINGS.iter().enumerate() {
        let tile = tiles.get(&heading).ok_or(ImageryError::MissingHeading(heading))?;
        if tile.width() != TILE_SIZE || tile.height() != TILE_SIZE {
            return Err(ImageryError::BadTileDimensions {
                heading,
                w: tile.width(),
                h: tile.height(),
            });
        }
        let x0 = slot as u32 * TILE_SIZE;
        for y in 0..TILE_SIZE {
            for x in 0..TILE_SIZE {
                out.put_pixel(x0 + x, y, *tile.get_pixel(x, y));
            }
        }
    }
    Ok(Panorama { point_id: point_id.into(), image: out })
}

/// Perceptual brightness of one pixel: 0.2126·R + 0.7152·G + 0.0722·B.
pub fn pixel_luminosity(r: u8, g: u8, b: u8) -> f64 {
    0.2126 * r as f64 + 0.7152 * g as f64 + 0.0722 * b as f64
}

/// Arithmetic mean of pixel luminosity over the whole panorama.
pub fn mean_luminosity(pan: &Panorama) -> LuminosityRecord {
    let mut sum = 0.0;
    for px in pan.image.pixels() {
        sum += pixel_luminosity(px[0], px[1], px[2]);
    }
    let n = (pan.image.width() as u64 * pan.image.height() as u64) as f64;
    LuminosityRecord { point_id: pan.point_id.clone(), l: sum / n }
}

/// Loads the six tiles for a point from a directory using the
/// `<point_id>_<heading>.png` naming convention. Alpha channels are
/// discarded during the RGB conversion.
pub fn load_tiles_from_dir(dir: &Path, point_id: &str) -> Result<BTreeMap<u16, RgbImage>, ImageryError> {
    let mut tiles = BTreeMap::new();
    for &heading in &HEADINGS {
        let path = dir.join(format!("{point_id}_{heading}.png"));
        let img = image::open(&path)
            .map_err(|source| ImageryError::TileRead { path: path.display().to_string(), source })?
            .to_rgb8();
        tiles.insert(heading, img);
    }
    Ok(tiles)
}
