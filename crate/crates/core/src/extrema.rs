//! Sliding-window local extrema detection on the grayscale view.

use crate::imaging::GrayImage;
use crate::{Error, Result};

/// Pixel position, `x` is the column and `y` the row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Point {
    pub x: usize,
    pub y: usize,
}

/// Local maxima and minima, each sorted in row-major order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExtremaSet {
    pub maxima: Vec<Point>,
    pub minima: Vec<Point>,
}

/// Finds the pixels that dominate their `w x w` neighbourhood.
///
/// With `strict` set, a pixel is a maximum only if it is strictly greater than
/// every other pixel of the window, so plateaus yield nothing. Without it,
/// ties with the center are allowed. Windows are only evaluated where they fit
/// entirely inside the image.
pub fn detect_local_extrema(gray: &GrayImage, w: usize, strict: bool) -> Result<ExtremaSet> {
    if w < 3 || w.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "extrema window must be odd and at least 3, got {w}"
        )));
    }
    let r = w / 2;
    let (width, height) = (gray.width(), gray.height());
    let mut set = ExtremaSet::default();
    if width < w || height < w {
        return Ok(set);
    }
    let data = gray.data();
    for y in r..height - r {
        for x in r..width - r {
            let center = data[y * width + x];
            let mut is_max = true;
            let mut is_min = true;
            'window: for wy in y - r..=y + r {
                let row = &data[wy * width..(wy + 1) * width];
                for (wx, &v) in row.iter().enumerate().take(x + r + 1).skip(x - r) {
                    if wx == x && wy == y {
                        continue;
                    }
                    if strict {
                        is_max &= center > v;
                        is_min &= center < v;
                    } else {
                        is_max &= center >= v;
                        is_min &= center <= v;
                    }
                    if !is_max && !is_min {
                        break 'window;
                    }
                }
            }
            if is_max {
                set.maxima.push(Point { x, y });
            }
            if is_min {
                set.minima.push(Point { x, y });
            }
        }
    }
    Ok(set)
}
