//! Centralized pressure matching: rendering, error and cost, the adaptive
//! CPM update, and the least-squares and step-size references.
//!
//! The update uses the 2-free form `g' = g − μ Hᴴ e`, so `μ` here equals
//! twice the step size of the analytic gradient `∇J = 2 Hᴴ e`.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scene::{complex_gaussian, dot, AtfMatrix, DesiredField, RowBlock};
use crate::C64;

/// Loudspeaker weights at one frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlFilter {
    weights: Vec<C64>,
    pub freq: f64,
}

impl ControlFilter {
    pub fn new(weights: Vec<C64>, freq: f64) -> Result<Self> {
        if weights.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::InvalidArgument("control filter has non-finite weights".into()));
        }
        Ok(ControlFilter { weights, freq })
    }

    pub fn zeros(n_speakers: usize, freq: f64) -> Self {
        ControlFilter {
            weights: vec![C64::new(0.0, 0.0); n_speakers],
            freq,
        }
    }

    pub fn weights(&self) -> &[C64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.weights)
    }

    pub fn into_weights(self) -> Vec<C64> {
        self.weights
    }

    pub(crate) fn from_raw(weights: Vec<C64>, freq: f64) -> Self {
        ControlFilter { weights, freq }
    }
}

pub(crate) fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub(crate) fn all_finite(v: &[C64]) -> bool {
    v.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PressureField(pub Vec<C64>);

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorVector(pub Vec<C64>);

/// Counts of complex arithmetic operations performed by an update.
pub trait OpCounter {
    fn mul(&mut self, n: u64);
    fn add(&mut self, n: u64);
}

/// Discards counts.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoCount;

impl OpCounter for NoCount {
    #[inline(always)]
    fn mul(&mut self, _: u64) {}
    #[inline(always)]
    fn add(&mut self, _: u64) {}
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct OpCount {
    pub additions: u64,
    pub multiplications: u64,
}

impl OpCounter for OpCount {
    fn mul(&mut self, n: u64) {
        self.multiplications += n;
    }
    fn add(&mut self, n: u64) {
        self.additions += n;
    }
}

/// `g − μ Σ_m rows[m]ᴴ e[m]`.
///
/// The errors are measured at the microphones, so forming them is not
/// counted; the gradient accumulation, the step scaling and the subtraction
/// are.
pub(crate) fn gradient_step<C: OpCounter>(
    g: &[C64],
    rows: RowBlock<'_>,
    errors: &[C64],
    mu: f64,
    counter: &mut C,
) -> Vec<C64> {
    let l = g.len();
    debug_assert_eq!(rows.n_cols(), l);
    debug_assert_eq!(rows.n_rows(), errors.len());
    let mut it = rows.rows().zip(errors);
    let mut acc: Vec<C64> = match it.next() {
        Some((row, e)) => {
            counter.mul(l as u64);
            row.iter().map(|h| h.conj() * e).collect()
        }
        None => vec![C64::new(0.0, 0.0); l],
    };
    for (row, e) in it {
        counter.mul(l as u64);
        counter.add(l as u64);
        for (a, h) in acc.iter_mut().zip(row) {
            *a += h.conj() * e;
        }
    }
    counter.mul(l as u64);
    counter.add(l as u64);
    g.iter().zip(&acc).map(|(gi, a)| gi - a * mu).collect()
}

/// `e_m = rows[m] · g − d_m`.
pub(crate) fn residuals(rows: RowBlock<'_>, g: &[C64], d: &[C64]) -> Vec<C64> {
    rows.rows().zip(d).map(|(row, dm)| dot(row, g) - dm).collect()
}

pub fn render_pressure(h: &AtfMatrix, g: &ControlFilter) -> Result<PressureField> {
    h.mul_vec(g.weights()).map(PressureField)
}

pub fn compute_error(p: &PressureField, d: &DesiredField) -> Result<ErrorVector> {
    if p.0.len() != d.len() {
        return Err(Error::Dimension {
            context: "error vector",
            expected: d.len(),
            actual: p.0.len(),
        });
    }
    Ok(ErrorVector(p.0.iter().zip(&d.values).map(|(a, b)| a - b).collect()))
}

/// Squared error norm `‖e‖²`.
pub fn mse_cost(e: &ErrorVector) -> f64 {
    e.0.iter().map(|z| z.norm_sqr()).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CpmState {
    pub filter: ControlFilter,
    step_size: f64,
    pub iteration: usize,
}

impl CpmState {
    pub fn new(filter: ControlFilter, step_size: f64) -> Result<Self> {
        if !(step_size.is_finite() && step_size > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "step size must be positive, got {step_size}"
            )));
        }
        Ok(CpmState {
            filter,
            step_size,
            iteration: 0,
        })
    }

    pub fn step_size(&self) -> f64 {
        self.step_size
    }
}

fn check_dims(h: &AtfMatrix, g: &ControlFilter, d: &DesiredField) -> Result<()> {
    if g.len() != h.n_cols() {
        return Err(Error::Dimension {
            context: "control filter length",
            expected: h.n_cols(),
            actual: g.len(),
        });
    }
    if d.len() != h.n_rows() {
        return Err(Error::Dimension {
            context: "desired field length",
            expected: h.n_rows(),
            actual: d.len(),
        });
    }
    Ok(())
}

/// One CPM iteration: `e = H g − d`, `g ← g − μ Hᴴ e`.
pub fn cpm_step(state: &CpmState, h: &AtfMatrix, d: &DesiredField) -> Result<CpmState> {
    cpm_step_counted(state, h, d, &mut NoCount)
}

pub fn cpm_step_counted<C: OpCounter>(
    state: &CpmState,
    h: &AtfMatrix,
    d: &DesiredField,
    counter: &mut C,
) -> Result<CpmState> {
    check_dims(h, &state.filter, d)?;
    let g = state.filter.weights();
    let e = residuals(h.block(), g, &d.values);
    let next = gradient_step(g, h.block(), &e, state.step_size, counter);
    if !all_finite(&next) {
        return Err(Error::Divergence {
            algorithm: "cpm".into(),
            node: None,
            iteration: state.iteration,
        });
    }
    Ok(CpmState {
        filter: ControlFilter::from_raw(next, state.filter.freq),
        step_size: state.step_size,
        iteration: state.iteration + 1,
    })
}

/// `(Hᴴ H + λ I)⁻¹ Hᴴ d`, via a QR factorisation of `[H; √λ I]`.
pub fn least_squares_solution(h: &AtfMatrix, d: &DesiredField, diag_load: f64) -> Result<ControlFilter> {
    if !(diag_load.is_finite() && diag_load >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "diagonal loading must be >= 0, got {diag_load}"
        )));
    }
    if d.len() != h.n_rows() {
        return Err(Error::Dimension {
            context: "desired field length",
            expected: h.n_rows(),
            actual: d.len(),
        });
    }
    let (m, l) = (h.n_rows(), h.n_cols());
    let extra = if diag_load > 0.0 { l } else { 0 };
    if m + extra < l {
        return Err(Error::RankDeficient { pivot: 0.0 });
    }
    let load = diag_load.sqrt();
    let a = DMatrix::from_fn(m + extra, l, |i, j| {
        if i < m {
            h.get(i, j)
        } else if i - m == j {
            C64::new(load, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let b = DMatrix::from_fn(m + extra, 1, |i, _| {
        if i < m {
            d.values[i]
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let qr = a.qr();
    let r = qr.r();
    let pivots: Vec<f64> = (0..l).map(|i| r[(i, i)].norm()).collect();
    let max = pivots.iter().cloned().fold(0.0, f64::max);
    let min = pivots.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(max > 0.0) || min <= 1e-12 * max {
        return Err(Error::RankDeficient { pivot: min });
    }
    let qtb = qr.q().adjoint() * b;
    let x = r
        .solve_upper_triangular(&qtb)
        .ok_or(Error::RankDeficient { pivot: min })?;
    ControlFilter::new(x.iter().copied().collect(), h.freq())
}

/// Largest eigenvalue of `Hᴴ H` by power iteration.
pub fn max_eigenvalue(h: &AtfMatrix) -> Result<f64> {
    if h.entries().iter().all(|z| *z == C64::new(0.0, 0.0)) {
        return Err(Error::InvalidArgument("ATF matrix is zero".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut v: Vec<C64> = (0..h.n_cols()).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
    let n0 = norm(&v);
    v.iter_mut().for_each(|z| *z /= n0);

    let mut lambda = 0.0;
    for _ in 0..100_000 {
        let hv = h.mul_vec(&v)?;
        let next = hv.iter().map(|z| z.norm_sqr()).sum::<f64>();
        let w = h.adjoint_mul_vec(&hv)?;
        let wn = norm(&w);
        if wn == 0.0 {
            break;
        }
        v = w.into_iter().map(|z| z / wn).collect();
        let converged = (next - lambda).abs() <= 1e-12 * next;
        lambda = next;
        if converged {
            break;
        }
    }
    if !(lambda > 0.0) {
        return Err(Error::DegenerateSignal(
            "power iteration start vector fell in the null space".into(),
        ));
    }
    Ok(lambda)
}

/// Mean-convergence bound `2 / λ_max(Hᴴ H)` on the step size.
pub fn stability_bound(h: &AtfMatrix) -> Result<f64> {
    Ok(2.0 / max_eigenvalue(h)?)
}
