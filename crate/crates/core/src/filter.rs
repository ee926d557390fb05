//! Separable filtering with edge replication.

/// Sampled Gaussian normalized to unit sum, `2 * radius + 1` taps.
pub fn gaussian_kernel(sigma: f64, radius: usize) -> Vec<f64> {
    let r = radius as isize;
    let mut k: Vec<f64> = (-r..=r)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    for v in &mut k {
        *v /= sum;
    }
    k
}

/// Uniform kernel of odd length `window`.
pub fn box_kernel(window: usize) -> Vec<f64> {
    vec![1.0 / window as f64; window]
}

/// Convolves a plane with a symmetric odd-length kernel along rows then
/// columns, replicating edge pixels.
pub fn separable(plane: &[f64], width: usize, height: usize, kernel: &[f64]) -> Vec<f64> {
    debug_assert_eq!(plane.len(), width * height);
    debug_assert!(kernel.len() % 2 == 1);
    let radius = (kernel.len() / 2) as isize;
    let clamp_w = |i: isize| i.clamp(0, width as isize - 1) as usize;
    let clamp_h = |i: isize| i.clamp(0, height as isize - 1) as usize;

    let mut tmp = vec![0.0; plane.len()];
    for r in 0..height {
        let row = &plane[r * width..(r + 1) * width];
        for c in 0..width {
            let mut acc = 0.0;
            for (t, &kv) in kernel.iter().enumerate() {
                acc += kv * row[clamp_w(c as isize + t as isize - radius)];
            }
            tmp[r * width + c] = acc;
        }
    }
    let mut out = vec![0.0; plane.len()];
    for r in 0..height {
        for (t, &kv) in kernel.iter().enumerate() {
            let src = clamp_h(r as isize + t as isize - radius);
            let src_row = &tmp[src * width..(src + 1) * width];
            let dst = &mut out[r * width..(r + 1) * width];
            for (d, &s) in dst.iter_mut().zip(src_row) {
                *d += kv * s;
            }
        }
    }
    out
}

/// Mean over a `window x window` neighborhood, edge-replicated.
pub fn box_filter(plane: &[f64], width: usize, height: usize, window: usize) -> Vec<f64> {
    separable(plane, width, height, &box_kernel(window))
}
