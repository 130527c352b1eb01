use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{Field, Grid, Spectrum};
use crate::error::Result;

#[derive(Clone)]
struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

fn plans(n: usize) -> Plans {
    static CACHE: OnceLock<Mutex<HashMap<usize, Plans>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Plans { forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) }
        })
        .clone()
}

thread_local! {
    static SCRATCH: std::cell::RefCell<Vec<Complex64>> = const { std::cell::RefCell::new(Vec::new()) };
}

fn process_rows(fft: &Arc<dyn Fft<f64>>, data: &mut [Complex64], n: usize) {
    let scratch_len = fft.get_inplace_scratch_len();
    data.par_chunks_mut(n).for_each_init(
        || vec![Complex64::new(0.0, 0.0); scratch_len],
        |scratch, row| fft.process_with_scratch(row, scratch),
    );
}

fn transpose_square(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

/// Unnormalised in-place DFT over every axis of `grid`.
pub(crate) fn dft_in_place(grid: &Grid, data: &mut [Complex64], inverse: bool) {
    let n = grid.points_per_axis();
    let p = plans(n);
    let fft = if inverse { &p.inverse } else { &p.forward };
    match grid.dim() {
        1 => SCRATCH.with(|cell| {
            let mut scratch = cell.borrow_mut();
            let len = fft.get_inplace_scratch_len();
            if scratch.len() < len {
                scratch.resize(len, Complex64::new(0.0, 0.0));
            }
            fft.process_with_scratch(data, &mut scratch[..len]);
        }),
        _ => {
            process_rows(fft, data, n);
            transpose_square(data, n);
            process_rows(fft, data, n);
            transpose_square(data, n);
        }
    }
}

/// Normalised forward transform (see the module docs for the convention).
pub fn forward_transform(f: &Field) -> Result<Spectrum> {
    f.check_finite()?;
    let grid = f.grid().clone();
    let mut data: Vec<Complex64> = f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    dft_in_place(&grid, &mut data, false);
    let scale = 1.0 / grid.len() as f64;
    data.iter_mut().for_each(|c| *c *= scale);
    Spectrum::new(grid, data)
}

/// Inverse transform; the imaginary part (roundoff for conjugate-symmetric input) is dropped.
pub fn inverse_transform(s: &Spectrum) -> Field {
    let grid = s.grid().clone();
    let mut data = s.coefficients().to_vec();
    dft_in_place(&grid, &mut data, true);
    let values = data.into_iter().map(|c| c.re).collect();
    Field::new(grid, values).expect("layout preserved by the transform")
}
