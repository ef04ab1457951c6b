//! Separable 2D Gaussian smoothing of single-channel spatial maps.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Border {
    /// Drop out-of-lattice taps and rescale the remaining weights to sum to 1.
    Renormalize,
    /// Wrap around the lattice edges.
    Periodic,
}

/// Truncated kernel `exp(−k²/2σ²)` for `k ∈ [−⌈3σ⌉, ⌈3σ⌉]` (unnormalized).
pub fn gaussian_taps(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    (-radius..=radius)
        .map(|k| (-((k * k) as f64) / (2.0 * sigma * sigma)).exp())
        .collect()
}

/// Smooths a row-major `height × width` map. `sigma == 0` returns the input.
pub fn gaussian_smooth(map: &[f64], height: usize, width: usize, sigma: f64, border: Border) -> Vec<f64> {
    assert_eq!(map.len(), height * width, "map shape");
    assert!(sigma >= 0.0 && sigma.is_finite(), "sigma must be finite and >= 0");
    if sigma == 0.0 {
        return map.to_vec();
    }
    let taps = gaussian_taps(sigma);
    let mut rows_done = vec![0.0; map.len()];
    for r in 0..height {
        let line = &map[r * width..(r + 1) * width];
        let out = &mut rows_done[r * width..(r + 1) * width];
        convolve_line(line, &taps, border, out);
    }
    let mut column = vec![0.0; height];
    let mut smoothed_col = vec![0.0; height];
    let mut out = vec![0.0; map.len()];
    for c in 0..width {
        for r in 0..height {
            column[r] = rows_done[r * width + c];
        }
        convolve_line(&column, &taps, border, &mut smoothed_col);
        for r in 0..height {
            out[r * width + c] = smoothed_col[r];
        }
    }
    out
}

fn convolve_line(line: &[f64], taps: &[f64], border: Border, out: &mut [f64]) {
    let n = line.len() as isize;
    let radius = (taps.len() / 2) as isize;
    let full: f64 = taps.iter().sum();
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        let mut weight = 0.0;
        for (t, &w) in taps.iter().enumerate() {
            let j = i as isize + t as isize - radius;
            match border {
                Border::Renormalize => {
                    if (0..n).contains(&j) {
                        acc += w * line[j as usize];
                        weight += w;
                    }
                }
                Border::Periodic => {
                    acc += w * line[j.rem_euclid(n) as usize];
                }
            }
        }
        *o = match border {
            Border::Renormalize => acc / weight,
            Border::Periodic => acc / full,
        };
    }
}
