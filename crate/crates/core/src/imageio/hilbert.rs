//! Hilbert curve index-to-coordinate mapping.

/// Smallest power-of-two side covering `extent`.
pub(crate) fn covering_side(extent: usize) -> usize {
    let mut side = 1usize;
    while side < extent {
        side *= 2;
    }
    side
}

/// Maps a distance along the Hilbert curve of an `n`×`n` grid (`n` a power of
/// two) to grid coordinates.
pub(crate) fn d2xy(n: usize, d: usize) -> (usize, usize) {
    let (mut x, mut y) = (0usize, 0usize);
    let mut t = d;
    let mut s = 1usize;
    while s < n {
        let rx = 1 & (t / 2);
        let ry = 1 & (t ^ rx);
        if ry == 0 {
            if rx == 1 {
                x = s - 1 - x;
                y = s - 1 - y;
            }
            std::mem::swap(&mut x, &mut y);
        }
        x += s * rx;
        y += s * ry;
        t /= 4;
        s *= 2;
    }
    (x, y)
}
