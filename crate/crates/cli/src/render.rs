//! PNG rendering of observable and latent fields.

use std::io::Cursor;
use std::path::Path;

use image::codecs::png::PngEncoder;
use image::{ExtendedColorType, ImageEncoder, Rgb, RgbImage};
use lcs_core::{format, Grid, SpacetimeField, StateField, MARGIN};

use crate::error::{CliError, Result, StageExt};

/// Categorical cycle for state ids; id `s` uses entry `s % 16`.
pub const PALETTE: [[u8; 3]; 16] = [
    [31, 119, 180],
    [255, 127, 14],
    [44, 160, 44],
    [214, 39, 40],
    [148, 103, 189],
    [140, 86, 75],
    [227, 119, 194],
    [127, 127, 127],
    [188, 189, 34],
    [23, 190, 207],
    [174, 199, 232],
    [255, 187, 120],
    [152, 223, 138],
    [255, 152, 150],
    [197, 176, 213],
    [196, 156, 148],
];

pub const MARGIN_COLOR: [u8; 3] = [0, 0, 0];
/// Observable points with no decoded value.
pub const UNCOVERED_COLOR: [u8; 3] = [128, 0, 0];
pub const MAX_STATES: usize = 254;

const GAP: u32 = 4;
const BACKGROUND: [u8; 3] = [255, 255, 255];

fn gray(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 256.0).floor().min(255.0) as u8
}

fn cropped(cols: usize, sites: usize) -> usize {
    if sites == 0 {
        cols
    } else {
        sites.min(cols)
    }
}

/// Time runs down the image, sites left to right. `sites = 0` keeps all sites.
pub fn render_observable(field: &SpacetimeField, covered: Option<&Grid<bool>>, sites: usize) -> RgbImage {
    let w = cropped(field.cols(), sites);
    RgbImage::from_fn(w as u32, field.rows() as u32, |x, y| {
        let (r, t) = (x as usize, y as usize);
        match covered {
            Some(mask) if !mask.get(r, t) => Rgb(UNCOVERED_COLOR),
            _ => Rgb([gray(field.get(r, t)); 3]),
        }
    })
}

pub fn render_states(states: &StateField, sites: usize) -> Result<RgbImage> {
    let bound = states.label_bound();
    if bound > MAX_STATES {
        return Err(CliError::Invalid(format!(
            "state field has {bound} labels; rendering supports at most {MAX_STATES}"
        )));
    }
    if let Some(&bad) = states.data().iter().find(|&&s| s < MARGIN) {
        return Err(CliError::Invalid(format!("invalid state label {bad}")));
    }
    let w = cropped(states.cols(), sites);
    Ok(RgbImage::from_fn(w as u32, states.rows() as u32, |x, y| {
        let s = states.get(x as usize, y as usize);
        if s == MARGIN {
            Rgb(MARGIN_COLOR)
        } else {
            Rgb(PALETTE[s as usize % PALETTE.len()])
        }
    }))
}

/// Two rows of three panels separated by white gaps.
pub fn composite(top: [&RgbImage; 3], bottom: [&RgbImage; 3]) -> RgbImage {
    let col_w: Vec<u32> = (0..3).map(|i| top[i].width().max(bottom[i].width())).collect();
    let top_h = top.iter().map(|p| p.height()).max().unwrap_or(0);
    let bottom_h = bottom.iter().map(|p| p.height()).max().unwrap_or(0);
    let width = col_w.iter().sum::<u32>() + 2 * GAP;
    let height = top_h + GAP + bottom_h;
    let mut out = RgbImage::from_pixel(width, height, Rgb(BACKGROUND));
    for (row, y0) in [(top, 0), (bottom, top_h + GAP)] {
        let mut x0 = 0;
        for (i, panel) in row.iter().enumerate() {
            image::imageops::replace(&mut out, *panel, x0 as i64, y0 as i64);
            x0 += col_w[i] + GAP;
        }
    }
    out
}

pub fn encode_png(img: &RgbImage) -> Result<Vec<u8>> {
    let mut buf = Cursor::new(Vec::new());
    PngEncoder::new(&mut buf)
        .write_image(img.as_raw(), img.width(), img.height(), ExtendedColorType::Rgb8)
        .map_err(|e| CliError::Invalid(format!("PNG encoding failed: {e}")))?;
    Ok(buf.into_inner())
}

pub fn write_png(path: &Path, img: &RgbImage) -> Result<()> {
    format::write_atomic(path, &encode_png(img)?).stage("render")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_field_is_uniform_gray() {
        let img = render_observable(&SpacetimeField::filled(4, 7, 0.5), None, 0);
        assert_eq!(img.dimensions(), (7, 4));
        assert!(img.pixels().all(|p| p.0 == [128, 128, 128]));
    }

    #[test]
    fn gray_levels_cover_unit_interval() {
        assert_eq!(gray(0.0), 0);
        assert_eq!(gray(0.999_999), 255);
        assert_eq!(gray(1.0), 255);
    }

    #[test]
    fn states_use_palette_and_black_margins() {
        let s = StateField::from_rows(&[vec![MARGIN, MARGIN], vec![0, 17]]).unwrap();
        let img = render_states(&s, 0).unwrap();
        assert_eq!(img.get_pixel(0, 0).0, MARGIN_COLOR);
        assert_eq!(img.get_pixel(0, 1).0, PALETTE[0]);
        assert_eq!(img.get_pixel(1, 1).0, PALETTE[1]);
    }

    #[test]
    fn palette_overflow_is_an_error() {
        let s = StateField::from_rows(&[vec![0, 254]]).unwrap();
        assert!(render_states(&s, 0).is_err());
        let s = StateField::from_rows(&[vec![0, 253]]).unwrap();
        assert!(render_states(&s, 0).is_ok());
    }

    #[test]
    fn uncovered_points_are_marked_and_sites_cropped() {
        let f = SpacetimeField::filled(2, 5, 0.0);
        let mut mask = Grid::filled(2, 5, true);
        mask.set(1, 0, false);
        let img = render_observable(&f, Some(&mask), 3);
        assert_eq!(img.dimensions(), (3, 2));
        assert_eq!(img.get_pixel(1, 0).0, UNCOVERED_COLOR);
        assert_eq!(img.get_pixel(1, 1).0, [0, 0, 0]);
    }

    #[test]
    fn composite_places_six_panels() {
        let panel = |v: u8, w, h| RgbImage::from_pixel(w, h, Rgb([v; 3]));
        let (a, b, c) = (panel(10, 5, 3), panel(20, 5, 3), panel(30, 5, 3));
        let (d, e, f) = (panel(40, 5, 2), panel(50, 5, 2), panel(60, 5, 2));
        let img = composite([&a, &b, &c], [&d, &e, &f]);
        assert_eq!(img.dimensions(), (15 + 2 * GAP, 3 + GAP + 2));
        let at = |x: u32, y: u32| img.get_pixel(x, y).0[0];
        assert_eq!((at(0, 0), at(5 + GAP, 0), at(10 + 2 * GAP, 0)), (10, 20, 30));
        let y = 3 + GAP;
        assert_eq!((at(0, y), at(5 + GAP, y), at(10 + 2 * GAP, y)), (40, 50, 60));
        assert_eq!(at(5, 0), 255);
    }

    #[test]
    fn png_encoding_is_deterministic() {
        let img = render_observable(&SpacetimeField::filled(3, 3, 0.25), None, 0);
        assert_eq!(encode_png(&img).unwrap(), encode_png(&img).unwrap());
    }
}
