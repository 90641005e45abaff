//! Deterministic rasterization of impedance loci into grayscale images.
//!
//! Every scenario is drawn into the same fixed R-X window so the images
//! share a coordinate frame and their textures stay comparable. Three
//! intensities only: background 255, zone circles 128, locus 0. Lines are
//! clipped to the window in world space, then drawn with integer Bresenham
//! stepping; no anti-aliasing anywhere, so output is bit-reproducible.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::relay::{ImpedanceLocus, ImpedancePoint};

pub const BACKGROUND: u8 = 255;
pub const ZONE_INTENSITY: u8 = 128;
pub const LOCUS_INTENSITY: u8 = 0;

/// The rendered region of the R-X plane, Ω.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewWindow {
    pub r_min: f64,
    pub r_max: f64,
    pub x_min: f64,
    pub x_max: f64,
}

impl Default for ViewWindow {
    fn default() -> Self {
        ViewWindow {
            r_min: -50.0,
            r_max: 250.0,
            x_min: -50.0,
            x_max: 250.0,
        }
    }
}

impl ViewWindow {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_max > self.r_min && self.x_max > self.x_min)
            || ![self.r_min, self.r_max, self.x_min, self.x_max]
                .iter()
                .all(|v| v.is_finite())
        {
            return Err(Error::InvalidInput {
                what: "view window".into(),
                why: "require finite r_min < r_max and x_min < x_max".into(),
            });
        }
        Ok(())
    }

    fn contains(&self, p: ImpedancePoint) -> bool {
        p.r >= self.r_min && p.r <= self.r_max && p.x >= self.x_min && p.x <= self.x_max
    }
}

/// Row-major 8-bit grayscale image; row 0 is the top edge (largest X).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput {
                what: "image size".into(),
                why: "width and height must be > 0".into(),
            });
        }
        Ok(GrayImage {
            width,
            height,
            pixels: vec![value; width * height],
        })
    }

    pub fn get(&self, col: usize, row: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    fn plot(&mut self, col: i64, row: i64, value: u8) {
        if col >= 0 && row >= 0 && (col as usize) < self.width && (row as usize) < self.height {
            self.pixels[row as usize * self.width + col as usize] = value;
        }
    }
}

/// Map a world point to pixel coordinates, or `None` when it lies outside
/// the window. Points are never clamped into view.
pub fn world_to_pixel(
    p: ImpedancePoint,
    w: &ViewWindow,
    width: usize,
    height: usize,
) -> Option<(usize, usize)> {
    if !w.contains(p) {
        return None;
    }
    let (col, row) = fractional_pixel(p, w, width, height);
    Some((col.round() as usize, row.round() as usize))
}

/// Unrounded pixel coordinates of an in-window (or clipped) world point.
fn fractional_pixel(p: ImpedancePoint, w: &ViewWindow, width: usize, height: usize) -> (f64, f64) {
    let col = (p.r - w.r_min) / (w.r_max - w.r_min) * (width as f64 - 1.0);
    let row = (w.x_max - p.x) / (w.x_max - w.x_min) * (height as f64 - 1.0);
    (col, row)
}

/// Liang-Barsky clip of a world segment to the window rectangle.
fn clip_segment(
    w: &ViewWindow,
    a: ImpedancePoint,
    b: ImpedancePoint,
) -> Option<(ImpedancePoint, ImpedancePoint)> {
    let dr = b.r - a.r;
    let dx = b.x - a.x;
    let mut t0 = 0.0f64;
    let mut t1 = 1.0f64;
    for (p, q) in [
        (-dr, a.r - w.r_min),
        (dr, w.r_max - a.r),
        (-dx, a.x - w.x_min),
        (dx, w.x_max - a.x),
    ] {
        if p == 0.0 {
            if q < 0.0 {
                return None;
            }
        } else {
            let r = q / p;
            if p < 0.0 {
                if r > t1 {
                    return None;
                }
                if r > t0 {
                    t0 = r;
                }
            } else {
                if r < t0 {
                    return None;
                }
                if r < t1 {
                    t1 = r;
                }
            }
        }
    }
    let at = |t: f64| ImpedancePoint {
        r: a.r + t * dr,
        x: a.x + t * dx,
    };
    Some((at(t0), at(t1)))
}

fn draw_line_px(img: &mut GrayImage, a: (i64, i64), b: (i64, i64), value: u8) {
    let (mut c0, mut r0) = a;
    let (c1, r1) = b;
    let dc = (c1 - c0).abs();
    let dr = -(r1 - r0).abs();
    let sc = if c0 < c1 { 1 } else { -1 };
    let sr = if r0 < r1 { 1 } else { -1 };
    let mut err = dc + dr;
    loop {
        img.plot(c0, r0, value);
        if c0 == c1 && r0 == r1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dr {
            err += dr;
            c0 += sc;
        }
        if e2 <= dc {
            err += dc;
            r0 += sr;
        }
    }
}

fn draw_segment(
    img: &mut GrayImage,
    w: &ViewWindow,
    a: ImpedancePoint,
    b: ImpedancePoint,
    value: u8,
) {
    let Some((ca, cb)) = clip_segment(w, a, b) else {
        return;
    };
    let (fc0, fr0) = fractional_pixel(ca, w, img.width, img.height);
    let (fc1, fr1) = fractional_pixel(cb, w, img.width, img.height);
    draw_line_px(
        img,
        (fc0.round() as i64, fr0.round() as i64),
        (fc1.round() as i64, fr1.round() as i64),
        value,
    );
}

fn draw_polyline(
    img: &mut GrayImage,
    w: &ViewWindow,
    pts: &[ImpedancePoint],
    value: u8,
    closed: bool,
) {
    match pts.len() {
        0 => {}
        1 => {
            if let Some((c, r)) = world_to_pixel(pts[0], w, img.width, img.height) {
                img.plot(c as i64, r as i64, value);
            }
        }
        _ => {
            for pair in pts.windows(2) {
                draw_segment(img, w, pair[0], pair[1], value);
            }
            if closed {
                draw_segment(img, w, pts[pts.len() - 1], pts[0], value);
            }
        }
    }
}

/// Render zone circles (closed polylines, intensity 128) and then the
/// impedance locus (open polyline, intensity 0) over a white background.
/// The locus is drawn last so it always wins where they overlap.
pub fn render_scene(
    locus: &ImpedanceLocus,
    zones: &[Vec<ImpedancePoint>],
    w: &ViewWindow,
    width: usize,
    height: usize,
) -> Result<GrayImage> {
    w.validate()?;
    let mut img = GrayImage::filled(width, height, BACKGROUND)?;
    for zone in zones {
        draw_polyline(&mut img, w, zone, ZONE_INTENSITY, true);
    }
    draw_polyline(&mut img, w, &locus.points, LOCUS_INTENSITY, false);
    Ok(img)
}

/// Write a binary PGM (P5) file with a fixed 255 max value.
pub fn write_pgm(img: &GrayImage, path: &Path) -> Result<()> {
    let mut f = fs::File::create(path)?;
    write!(f, "P5\n{} {}\n255\n", img.width, img.height)?;
    f.write_all(&img.pixels)?;
    Ok(())
}

/// Read a binary PGM (P5) file. Only max value 255 is accepted, and the
/// payload must hold exactly width*height bytes.
pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    let data = fs::read(path)?;
    let bad = |why: &str| Error::PgmFormat(format!("{}: {why}", path.display()));

    let mut pos = 0usize;
    let mut token = |data: &[u8]| -> Result<Vec<u8>> {
        // Skip whitespace and `#` comment lines between header fields.
        loop {
            while pos < data.len() && data[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < data.len() && data[pos] == b'#' {
                while pos < data.len() && data[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < data.len() && !data[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::PgmFormat("truncated header".into()));
        }
        Ok(data[start..pos].to_vec())
    };

    if token(&data)? != b"P5" {
        return Err(bad("not a binary PGM (P5) file"));
    }
    let parse = |raw: Vec<u8>, what: &str| -> Result<usize> {
        std::str::from_utf8(&raw)
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| Error::PgmFormat(format!("{}: bad {what}", path.display())))
    };
    let width = parse(token(&data)?, "width")?;
    let height = parse(token(&data)?, "height")?;
    let maxval = parse(token(&data)?, "max value")?;
    if width == 0 || height == 0 {
        return Err(bad("zero image dimension"));
    }
    if maxval != 255 {
        return Err(bad("max value must be 255"));
    }
    // Exactly one whitespace byte separates the header from the payload.
    if pos >= data.len() || !data[pos].is_ascii_whitespace() {
        return Err(bad("missing header terminator"));
    }
    pos += 1;
    let body = &data[pos..];
    if body.len() != width * height {
        return Err(bad("payload size does not match dimensions"));
    }
    Ok(GrayImage {
        width,
        height,
        pixels: body.to_vec(),
    })
}
