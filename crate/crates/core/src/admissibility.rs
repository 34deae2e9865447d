//! How well a gradient flow can be followed by the unicycle.
//!
//! For a potential `V` on a box `X` the measure is
//!
//! ```text
//! J_X[V] = 1/mu(X) * integral over X of rho(x, grad V(x))^q / |grad V(x)|^q dx
//! ```
//!
//! where `rho(x, p) = inf_u |u1 f1(x) + u2 f2(x) + p|` is the part of `p`
//! outside the span of the two input fields. With unconstrained inputs the
//! infimum is `|p1 sin x3 - p2 cos x3|`. `J = 0` means the flow is exactly
//! realizable; values near 1 mean the gradient mostly points sideways.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{norm, vector_fields, State, Vec3};
use crate::potential::Potential;

pub const DEFAULT_GRID_N: u32 = 200;
pub const DEFAULT_SAMPLES: u64 = 1 << 22;
pub const DEFAULT_SEED: u64 = 20_251_017;
pub const DEFAULT_GRAD_FLOOR: f64 = 1e-12;
/// Monte-Carlo samples per independently seeded stream.
const MC_CHUNK: u64 = 1 << 16;

/// Coefficient triples `(c1, c2, c3)` of the quadratic forms in the reference table.
pub const TABLE1_COEFFICIENTS: [[f64; 3]; 7] = [
    [1.0, 1.0, 1.0],
    [2.0, 1.0, 1.0],
    [0.5, 1.0, 1.0],
    [1.0, 2.0, 1.0],
    [1.0, 0.5, 1.0],
    [1.0, 1.0, 2.0],
    [1.0, 1.0, 0.5],
];

/// Residual of `-p` after projecting onto `span{f1(x), f2(x)}`.
pub fn rho(x: &State, p: Vec3) -> f64 {
    let (s, c) = x.x3.sin_cos();
    (p[0] * s - p[1] * c).abs()
}

/// Nested grid search for `min_u |u1 f1 + u2 f2 + p|` over
/// `u in [-coarse_range, coarse_range]^2`: a 51x51 grid, then `refine_iters`
/// rounds that re-centre on the best point and shrink the box tenfold.
///
/// Requires `coarse_range >= |p|`, which contains the minimiser because
/// `f1` and `f2` are orthonormal.
pub fn rho_bruteforce(x: &State, p: Vec3, coarse_range: f64, refine_iters: u32) -> Result<f64> {
    const N: i32 = 51;
    if !(coarse_range >= norm(p)) {
        return Err(Error::param(
            "coarse_range",
            format!("must be at least |p| = {}, got {coarse_range}", norm(p)),
        ));
    }
    let (f1, f2) = vector_fields(x);
    let residual = |u1: f64, u2: f64| norm([0, 1, 2].map(|i| u1 * f1[i] + u2 * f2[i] + p[i]));
    let mut centre = (0.0, 0.0);
    let mut half = coarse_range;
    let mut best = residual(0.0, 0.0);
    for _ in 0..=refine_iters {
        let step = 2.0 * half / (N - 1) as f64;
        let (c1, c2) = centre;
        for i in 0..N {
            let u1 = c1 - half + i as f64 * step;
            for j in 0..N {
                let u2 = c2 - half + j as f64 * step;
                let r = residual(u1, u2);
                if r < best {
                    best = r;
                    centre = (u1, u2);
                }
            }
        }
        half /= 10.0;
    }
    Ok(best)
}

/// Axis-aligned box of states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    lo: Vec3,
    hi: Vec3,
}

impl BoxDomain {
    pub fn new(lo: Vec3, hi: Vec3) -> Result<Self> {
        for i in 0..3 {
            if !(lo[i] < hi[i]) || !lo[i].is_finite() || !hi[i].is_finite() {
                return Err(Error::param(
                    "domain",
                    format!("need finite lo < hi on every axis, got lo = {lo:?}, hi = {hi:?}"),
                ));
            }
        }
        Ok(BoxDomain { lo, hi })
    }

    pub fn cube(lo: f64, hi: f64) -> Result<Self> {
        BoxDomain::new([lo; 3], [hi; 3])
    }

    /// `[-1, 1]^3`
    pub fn unit_cube() -> Self {
        BoxDomain {
            lo: [-1.0; 3],
            hi: [1.0; 3],
        }
    }

    pub fn lo(&self) -> Vec3 {
        self.lo
    }

    pub fn hi(&self) -> Vec3 {
        self.hi
    }

    /// Lebesgue measure.
    pub fn measure(&self) -> f64 {
        (0..3).map(|i| self.hi[i] - self.lo[i]).product()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureMethod {
    Midpoint,
    MonteCarlo,
}

impl QuadratureMethod {
    pub fn name(&self) -> &'static str {
        match self {
            QuadratureMethod::Midpoint => "midpoint",
            QuadratureMethod::MonteCarlo => "monte_carlo",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmissibilityConfig {
    pub q: f64,
    pub method: QuadratureMethod,
    /// Cells per axis for the midpoint rule; even, so no centre lands on the origin.
    pub grid_n: u32,
    pub samples: u64,
    pub seed: u64,
    /// Points with `|grad V| <= grad_floor` contribute zero and are counted as excluded.
    pub grad_floor: f64,
}

impl Default for AdmissibilityConfig {
    fn default() -> Self {
        AdmissibilityConfig {
            q: 2.0,
            method: QuadratureMethod::Midpoint,
            grid_n: DEFAULT_GRID_N,
            samples: DEFAULT_SAMPLES,
            seed: DEFAULT_SEED,
            grad_floor: DEFAULT_GRAD_FLOOR,
        }
    }
}

impl AdmissibilityConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.q > 0.0 && self.q.is_finite()) {
            return Err(Error::param("q", format!("must be positive, got {}", self.q)));
        }
        if !(self.grad_floor >= 0.0) {
            return Err(Error::param(
                "grad_floor",
                format!("must be nonnegative, got {}", self.grad_floor),
            ));
        }
        match self.method {
            QuadratureMethod::Midpoint if self.grid_n < 2 || !self.grid_n.is_multiple_of(2) => Err(
                Error::param("grid_n", format!("must be even and >= 2, got {}", self.grid_n)),
            ),
            QuadratureMethod::MonteCarlo if self.samples == 0 => {
                Err(Error::param("samples", "must be at least 1"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmissibilityReport {
    pub value: f64,
    /// Standard error of the Monte-Carlo estimate.
    pub stderr: Option<f64>,
    pub points: u64,
    pub excluded: u64,
}

/// Partial sums of one chunk, reduced in a fixed order.
#[derive(Debug, Clone, Copy, Default)]
struct Partial {
    sum: f64,
    sum_sq: f64,
    excluded: u64,
}

impl Partial {
    fn merge(self, other: Partial) -> Partial {
        Partial {
            sum: self.sum + other.sum,
            sum_sq: self.sum_sq + other.sum_sq,
            excluded: self.excluded + other.excluded,
        }
    }
}

struct Integrand<'a> {
    potential: &'a Potential,
    q: f64,
    grad_floor: f64,
}

impl Integrand<'_> {
    /// `Some(rho^q / |g|^q)`, or `None` when the point is excluded.
    #[inline]
    fn eval(&self, x: &State, sin_x3: f64, cos_x3: f64) -> Option<f64> {
        let g = self.potential.gradient(x);
        let g_norm = norm(g);
        if g_norm <= self.grad_floor {
            return None;
        }
        let ratio = (g[0] * sin_x3 - g[1] * cos_x3).abs() / g_norm;
        Some(if self.q == 2.0 { ratio * ratio } else { ratio.powf(self.q) })
    }

    fn accumulate(&self, acc: &mut Partial, x: &State, s: f64, c: f64) {
        match self.eval(x, s, c) {
            Some(v) => {
                acc.sum += v;
                acc.sum_sq += v * v;
            }
            None => acc.excluded += 1,
        }
    }
}

/// Estimates the admissibility measure of the gradient flow of `v` over `domain`
/// with unconstrained inputs.
///
/// Work is split into fixed chunks (one slab of the grid per first-axis cell,
/// or one seeded stream per Monte-Carlo chunk) whose partial sums are added in
/// index order, so the result does not depend on the number of worker threads.
pub fn admissibility_measure(
    v: &Potential,
    domain: &BoxDomain,
    cfg: &AdmissibilityConfig,
) -> Result<AdmissibilityReport> {
    cfg.validate()?;
    let integrand = Integrand {
        potential: v,
        q: cfg.q,
        grad_floor: cfg.grad_floor,
    };
    let (lo, hi) = (domain.lo, domain.hi);
    let (total, points) = match cfg.method {
        QuadratureMethod::Midpoint => {
            let n = cfg.grid_n as usize;
            let centres: Vec<Vec<f64>> = (0..3)
                .map(|axis| {
                    let width = (hi[axis] - lo[axis]) / n as f64;
                    (0..n).map(|i| lo[axis] + (i as f64 + 0.5) * width).collect()
                })
                .collect();
            let trig: Vec<(f64, f64)> = centres[2].iter().map(|x3| x3.sin_cos()).collect();
            let slabs: Vec<Partial> = centres[0]
                .par_iter()
                .map(|&x1| {
                    let mut acc = Partial::default();
                    for &x2 in &centres[1] {
                        for (&x3, &(s, c)) in centres[2].iter().zip(&trig) {
                            integrand.accumulate(&mut acc, &State::new(x1, x2, x3), s, c);
                        }
                    }
                    acc
                })
                .collect();
            let total = slabs.into_iter().fold(Partial::default(), Partial::merge);
            (total, (n as u64).pow(3))
        }
        QuadratureMethod::MonteCarlo => {
            let chunks = cfg.samples.div_ceil(MC_CHUNK);
            let parts: Vec<Partial> = (0..chunks)
                .into_par_iter()
                .map(|chunk| {
                    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                    rng.set_stream(chunk);
                    let count = MC_CHUNK.min(cfg.samples - chunk * MC_CHUNK);
                    let mut acc = Partial::default();
                    for _ in 0..count {
                        let x = State::new(
                            rng.gen_range(lo[0]..hi[0]),
                            rng.gen_range(lo[1]..hi[1]),
                            rng.gen_range(lo[2]..hi[2]),
                        );
                        let (s, c) = x.x3.sin_cos();
                        integrand.accumulate(&mut acc, &x, s, c);
                    }
                    acc
                })
                .collect();
            let total = parts.into_iter().fold(Partial::default(), Partial::merge);
            (total, cfg.samples)
        }
    };
    if total.excluded == points {
        return Err(Error::DegeneratePotential { points });
    }
    let n = points as f64;
    let value = total.sum / n;
    let stderr = match cfg.method {
        QuadratureMethod::Midpoint => None,
        QuadratureMethod::MonteCarlo => {
            let var = if points > 1 {
                ((total.sum_sq - n * value * value) / (n - 1.0)).max(0.0)
            } else {
                0.0
            };
            Some((var / n).sqrt())
        }
    };
    Ok(AdmissibilityReport {
        value,
        stderr,
        points,
        excluded: total.excluded,
    })
}

/// Measures the seven quadratic forms of [`TABLE1_COEFFICIENTS`] on `[-1, 1]^3`.
pub fn table1(cfg: &AdmissibilityConfig) -> Result<Vec<([f64; 3], AdmissibilityReport)>> {
    TABLE1_COEFFICIENTS
        .iter()
        .map(|c| {
            let v = Potential::quadratic(c[0], c[1], c[2])?;
            Ok((*c, admissibility_measure(&v, &BoxDomain::unit_cube(), cfg)?))
        })
        .collect()
}
