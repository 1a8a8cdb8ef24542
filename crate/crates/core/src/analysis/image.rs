//! Small raster helpers shared by the frame analyses.

/// One pass of a 3×3 box filter; edge pixels average over their in-bounds
/// neighbors.
pub fn box3(data: &[f64], width: usize, height: usize) -> Vec<f64> {
    let mut out = vec![0.0; data.len()];
    for r in 0..height {
        let r0 = r.saturating_sub(1);
        let r1 = (r + 1).min(height - 1);
        for c in 0..width {
            let c0 = c.saturating_sub(1);
            let c1 = (c + 1).min(width - 1);
            let mut sum = 0.0;
            for rr in r0..=r1 {
                sum += data[rr * width + c0..=rr * width + c1].iter().sum::<f64>();
            }
            out[r * width + c] = sum / ((r1 - r0 + 1) * (c1 - c0 + 1)) as f64;
        }
    }
    out
}

pub fn smooth(data: &[f64], width: usize, height: usize, passes: usize) -> Vec<f64> {
    (0..passes).fold(data.to_vec(), |acc, _| box3(&acc, width, height))
}

/// 8-connected components of `mask`, each a list of flat pixel indices.
pub fn label_components(mask: &[bool], width: usize, height: usize) -> Vec<Vec<usize>> {
    let mut seen = vec![false; mask.len()];
    let mut components = Vec::new();
    let mut stack = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut pixels = Vec::new();
        while let Some(p) = stack.pop() {
            pixels.push(p);
            let (r, c) = ((p / width) as isize, (p % width) as isize);
            for dr in -1..=1 {
                for dc in -1..=1 {
                    let (nr, nc) = (r + dr, c + dc);
                    if nr < 0 || nc < 0 || nr >= height as isize || nc >= width as isize {
                        continue;
                    }
                    let q = nr as usize * width + nc as usize;
                    if mask[q] && !seen[q] {
                        seen[q] = true;
                        stack.push(q);
                    }
                }
            }
        }
        components.push(pixels);
    }
    components
}

/// Weighted centroid `(x, y)` = `(col, row)` of the given pixels.
pub fn weighted_centroid(pixels: &[usize], weights: &[f64], width: usize) -> Option<(f64, f64)> {
    let (mut sx, mut sy, mut s) = (0.0, 0.0, 0.0);
    for &p in pixels {
        let w = weights[p];
        sx += w * (p % width) as f64;
        sy += w * (p / width) as f64;
        s += w;
    }
    (s > 0.0).then(|| (sx / s, sy / s))
}
