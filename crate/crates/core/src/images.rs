//! Conversions between rendered frames and network inputs.

use bee_sim::Image;
use ndarray::Array2;
use rand::Rng;

/// Stacks images as rows of unit-interval pixels.
pub fn to_matrix<'a>(images: impl IntoIterator<Item = &'a Image>) -> Array2<f64> {
    let mut rows = 0;
    let mut cols = 0;
    let mut data = Vec::new();
    for img in images {
        cols = img.len();
        data.extend(img.bytes().iter().map(|&p| p as f64 / 255.0));
        rows += 1;
    }
    Array2::from_shape_vec((rows, cols), data).expect("images of equal size")
}

/// Zero-pads by `pad` pixels on every side and cuts a window of the original
/// size at a uniformly random offset.
pub fn random_crop(image: &Image, pad: usize, rng: &mut impl Rng) -> Image {
    let oy = rng.random_range(0..=2 * pad);
    let ox = rng.random_range(0..=2 * pad);
    crop_at(image, pad, oy, ox)
}

/// The window of the padded image whose top-left corner is `(oy, ox)`.
pub fn crop_at(image: &Image, pad: usize, oy: usize, ox: usize) -> Image {
    let (h, w) = (image.height(), image.width());
    let mut pixels = Vec::with_capacity(h * w);
    for r in 0..h {
        for c in 0..w {
            // padded coordinate (r + oy, c + ox) maps to source (r + oy − pad, c + ox − pad)
            let sr = (r + oy).checked_sub(pad).filter(|&v| v < h);
            let sc = (c + ox).checked_sub(pad).filter(|&v| v < w);
            pixels.push(match (sr, sc) {
                (Some(sr), Some(sc)) => image.get(sr, sc),
                _ => 0,
            });
        }
    }
    Image::new(h, w, pixels).expect("crop keeps dimensions")
}
