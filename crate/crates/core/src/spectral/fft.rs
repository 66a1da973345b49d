use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{ComplexField, Grid};
use crate::{par, Error, Result};

type Plan = Arc<dyn Fft<f64>>;

/// Columns gathered together when transforming a strided axis.
const COLUMN_BATCH: usize = 32;
/// Contiguous lines handed to one `process` call on the fastest axis.
const ROW_BATCH: usize = 64;

fn plans(n: usize) -> (Plan, Plan) {
    static CACHE: OnceLock<Mutex<HashMap<usize, (Plan, Plan)>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    guard
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            (planner.plan_fft_forward(n), planner.plan_fft_inverse(n))
        })
        .clone()
}

fn transform_axis(data: &mut [Complex64], grid: &Grid, axis: usize, fft: &Plan) {
    let n = grid.n();
    let stride = n.pow((grid.dim() - 1 - axis) as u32);
    if stride == 1 {
        par::for_each_chunk(data, n * ROW_BATCH, |_, lines| fft.process(lines));
        return;
    }

    // Each unit owns a batch of `width` neighbouring columns, represented as
    // `n` disjoint slices (one per position along the axis).
    let width = stride.min(COLUMN_BATCH);
    let mut units: Vec<Vec<&mut [Complex64]>> = Vec::new();
    for block in data.chunks_mut(n * stride) {
        let mut slabs: Vec<_> = block.chunks_mut(stride).map(|s| s.chunks_mut(width)).collect();
        for _ in 0..stride.div_ceil(width) {
            units.push(
                slabs
                    .iter_mut()
                    .map(|it| it.next().expect("slab pieces exhausted"))
                    .collect(),
            );
        }
    }

    par::for_each_owned(units, |mut unit| {
        let w = unit[0].len();
        let mut buf = vec![Complex64::new(0.0, 0.0); w * n];
        for (i, piece) in unit.iter().enumerate() {
            for (j, v) in piece.iter().enumerate() {
                buf[j * n + i] = *v;
            }
        }
        fft.process(&mut buf);
        for (i, piece) in unit.iter_mut().enumerate() {
            for (j, v) in piece.iter_mut().enumerate() {
                *v = buf[j * n + i];
            }
        }
    });
}

fn check_len(grid: &Grid, data: &[Complex64]) -> Result<()> {
    if data.len() != grid.len() {
        return Err(Error::SizeMismatch {
            expected: grid.len(),
            actual: data.len(),
        });
    }
    Ok(())
}

/// Unnormalized forward DFT over all axes, in place.
pub fn fft_forward(grid: &Grid, data: &mut [Complex64]) -> Result<()> {
    check_len(grid, data)?;
    let (fwd, _) = plans(grid.n());
    for axis in 0..grid.dim() {
        transform_axis(data, grid, axis, &fwd);
    }
    Ok(())
}

/// Inverse DFT over all axes, in place, including the `1/n^d` factor.
pub fn fft_inverse(grid: &Grid, data: &mut [Complex64]) -> Result<()> {
    check_len(grid, data)?;
    let (_, inv) = plans(grid.n());
    for axis in 0..grid.dim() {
        transform_axis(data, grid, axis, &inv);
    }
    let s = 1.0 / grid.len() as f64;
    par::for_each_indexed(data, |_, v| *v *= s);
    Ok(())
}

pub fn fft_roundtrip(field: &ComplexField) -> Result<ComplexField> {
    let mut values = field.values().to_vec();
    fft_forward(field.grid(), &mut values)?;
    fft_inverse(field.grid(), &mut values)?;
    ComplexField::from_values(*field.grid(), values)
}
