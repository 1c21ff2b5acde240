use crate::quantum::C64;
use ndarray::Array2;
use rustfft::FftPlanner;

/// In-place 2-D DFT of a row-major array; the inverse is unnormalized.
pub(crate) fn fft2(planner: &mut FftPlanner<f64>, data: &mut Array2<C64>, inverse: bool) {
    let (rows, cols) = data.dim();
    let row_plan = if inverse { planner.plan_fft_inverse(cols) } else { planner.plan_fft_forward(cols) };
    let col_plan = if inverse { planner.plan_fft_inverse(rows) } else { planner.plan_fft_forward(rows) };
    row_plan.process(data.as_slice_mut().expect("standard layout"));
    let mut t = data.t().as_standard_layout().into_owned();
    col_plan.process(t.as_slice_mut().expect("standard layout"));
    data.assign(&t.t());
}

/// Angular frequencies of a length-`n` DFT with sample spacing `d`, in FFT order.
pub(crate) fn frequencies(n: usize, d: f64) -> Vec<f64> {
    let scale = 2.0 * std::f64::consts::PI / (n as f64 * d);
    (0..n).map(|k| if k < (n + 1) / 2 { k as f64 } else { k as f64 - n as f64 } * scale).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_single_mode() {
        let mut planner = FftPlanner::new();
        let (r, c) = (6, 8);
        let orig = Array2::from_shape_fn((r, c), |(i, j)| C64::new((i * j) as f64, i as f64 - j as f64));
        let mut a = orig.clone();
        fft2(&mut planner, &mut a, false);
        fft2(&mut planner, &mut a, true);
        for (x, y) in a.iter().zip(orig.iter()) {
            assert!((x / (r * c) as f64 - y).norm() < 1e-12);
        }
        let fr = frequencies(r, 1.0);
        let fc = frequencies(c, 1.0);
        let mut m = Array2::from_shape_fn((r, c), |(i, j)| C64::from_polar(1.0, fr[2] * i as f64 + fc[7] * j as f64));
        fft2(&mut planner, &mut m, false);
        assert!((m[[2, 7]].norm() - (r * c) as f64).abs() < 1e-9);
        assert!(m[[1, 7]].norm() < 1e-9);
    }
}
