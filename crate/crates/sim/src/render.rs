//! Anti-aliased 8-bit grayscale rendering.
//!
//! Every primitive is a disc or capsule drawn with one pixel of linear edge
//! falloff, so sub-pixel motion changes pixel intensities. Overlapping
//! primitives composite by maximum.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::env::SimState;
use crate::error::SimError;
use crate::geometry::{segment_distance, Vec2};
use crate::layout::{LayoutSpec, ObjectKind, GRIPPER_INTENSITY};

const DOOR_ARM_RADIUS: f64 = 0.025;
const DRAWER_BODY_RADIUS: f64 = 0.035;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Image {
    height: usize,
    width: usize,
    pixels: Vec<u8>,
}

impl Image {
    pub fn new(height: usize, width: usize, pixels: Vec<u8>) -> Result<Self, SimError> {
        if pixels.len() != height * width {
            return Err(SimError::Pgm(format!(
                "{} pixels for a {height}x{width} image",
                pixels.len()
            )));
        }
        Ok(Self { height, width, pixels })
    }

    pub fn blank(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            pixels: vec![0; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn bytes(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    /// Pixel intensities as reals in [0, 1], row-major.
    pub fn to_unit(&self) -> Vec<f64> {
        self.pixels.iter().map(|&p| p as f64 / 255.0).collect()
    }

    pub fn write_pgm<W: Write>(&self, mut out: W) -> Result<(), SimError> {
        write!(out, "P5\n{} {}\n255\n", self.width, self.height)?;
        out.write_all(&self.pixels)?;
        Ok(())
    }

    pub fn read_pgm<R: Read>(mut input: R) -> Result<Self, SimError> {
        let mut data = Vec::new();
        input.read_to_end(&mut data)?;
        let mut fields = Vec::new();
        let mut pos = 0;
        while fields.len() < 4 {
            while pos < data.len() && data[pos].is_ascii_whitespace() {
                pos += 1;
            }
            let start = pos;
            while pos < data.len() && !data[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(SimError::Pgm("truncated header".into()));
            }
            fields.push(String::from_utf8_lossy(&data[start..pos]).into_owned());
        }
        pos += 1;
        if fields[0] != "P5" || fields[3] != "255" {
            return Err(SimError::Pgm(format!("unsupported header {fields:?}")));
        }
        let parse = |s: &str| s.parse::<usize>().map_err(|e| SimError::Pgm(e.to_string()));
        let (width, height) = (parse(&fields[1])?, parse(&fields[2])?);
        let body = data.get(pos..).unwrap_or_default();
        if body.len() != width * height {
            return Err(SimError::Pgm(format!(
                "expected {} pixel bytes, found {}",
                width * height,
                body.len()
            )));
        }
        Image::new(height, width, body.to_vec())
    }

    /// Text dump, one character per pixel, for eyeballing renders.
    pub fn ascii(&self) -> String {
        const RAMP: &[u8] = b" .:-=+*#%@";
        let mut s = String::new();
        for r in 0..self.height {
            for c in 0..self.width {
                let v = self.get(r, c) as usize * (RAMP.len() - 1) / 255;
                s.push(RAMP[v] as char);
            }
            s.push('\n');
        }
        s
    }
}

enum Shape {
    Disc(Vec2, f64),
    Capsule(Vec2, Vec2, f64),
}

impl Shape {
    fn distance(&self, p: Vec2) -> f64 {
        match *self {
            Shape::Disc(c, r) => p.distance(c) - r,
            Shape::Capsule(a, b, r) => segment_distance(a, b, p) - r,
        }
    }
}

/// Renders `state` at the layout's resolution. A pure function of its inputs.
pub fn render(layout: &LayoutSpec, state: &SimState) -> Image {
    let mut shapes: Vec<(Shape, f64)> = Vec::with_capacity(state.objects.len() * 2 + 1);
    for o in &state.objects {
        let anchor = o.anchor();
        match &o.kind {
            ObjectKind::Block | ObjectKind::DistractorBlock => shapes.push((Shape::Disc(anchor, o.size), o.intensity)),
            ObjectKind::Door { hinge, .. } => {
                shapes.push((Shape::Capsule(*hinge, anchor, DOOR_ARM_RADIUS), o.intensity * 0.8));
                shapes.push((Shape::Disc(anchor, o.size), o.intensity));
            }
            ObjectKind::Drawer { base, .. } => {
                shapes.push((Shape::Capsule(*base, anchor, DRAWER_BODY_RADIUS), o.intensity * 0.6));
                shapes.push((Shape::Disc(anchor, o.size), o.intensity));
            }
        }
    }
    shapes.push((Shape::Disc(state.gripper, layout.gripper_radius), GRIPPER_INTENSITY));

    let n = layout.image_size;
    let px = 1.0 / n as f64;
    let mut pixels = Vec::with_capacity(n * n);
    for row in 0..n {
        for col in 0..n {
            let p = Vec2::new((col as f64 + 0.5) * px, (row as f64 + 0.5) * px);
            let v = shapes
                .iter()
                .map(|(s, intensity)| intensity * (0.5 - s.distance(p) / px).clamp(0.0, 1.0))
                .fold(0.0, f64::max);
            pixels.push((v.clamp(0.0, 1.0) * 255.0).round() as u8);
        }
    }
    Image {
        height: n,
        width: n,
        pixels,
    }
}
