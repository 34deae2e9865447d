//! Lyapunov function candidates and the control amplitude vector.
//!
//! Gradients are row vectors by convention; they are stored as plain
//! three-element arrays and the transpose is implicit.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{frame_inverse, mat_vec, State, Vec3};

type ScalarFn = dyn Fn(&State) -> f64 + Send + Sync;
type GradientFn = dyn Fn(&State) -> Vec3 + Send + Sync;

/// Finite-difference step used to validate custom gradients.
pub const FD_STEP: f64 = 1e-5;
/// Tolerance for custom gradient validation.
pub const FD_TOLERANCE: f64 = 1e-6;
const CUSTOM_CHECK_POINTS: usize = 16;
const CUSTOM_CHECK_SEED: u64 = 0x6772_6164;

#[derive(Clone)]
pub enum PotentialKind {
    /// `c1 x1^2 + c2 x2^2 + c3 x3^2`
    Quadratic { c: [f64; 3] },
    /// `alpha (x1^2 + x3^2) + x2^2 / alpha`
    VAlpha { alpha: f64 },
    Custom {
        value: Arc<ScalarFn>,
        gradient: Arc<GradientFn>,
    },
}

impl fmt::Debug for PotentialKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PotentialKind::Quadratic { c } => f.debug_struct("Quadratic").field("c", c).finish(),
            PotentialKind::VAlpha { alpha } => {
                f.debug_struct("VAlpha").field("alpha", alpha).finish()
            }
            PotentialKind::Custom { .. } => f.write_str("Custom"),
        }
    }
}

/// A C^2 potential with an analytic gradient. Immutable once built.
#[derive(Debug, Clone)]
pub struct Potential {
    kind: PotentialKind,
}

impl Potential {
    pub fn quadratic(c1: f64, c2: f64, c3: f64) -> Result<Self> {
        for (name, c) in [("c1", c1), ("c2", c2), ("c3", c3)] {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::param(name, format!("must be positive, got {c}")));
            }
        }
        Ok(Potential {
            kind: PotentialKind::Quadratic { c: [c1, c2, c3] },
        })
    }

    /// The sum of squares `|x|^2`.
    pub fn sum_of_squares() -> Self {
        Potential {
            kind: PotentialKind::Quadratic { c: [1.0; 3] },
        }
    }

    /// `alpha >= 1` is accepted so that `alpha = 1` yields the sum of squares.
    pub fn v_alpha(alpha: f64) -> Result<Self> {
        if !(alpha >= 1.0 && alpha.is_finite()) {
            return Err(Error::param("alpha", format!("must be >= 1, got {alpha}")));
        }
        Ok(Potential {
            kind: PotentialKind::VAlpha { alpha },
        })
    }

    /// User-supplied potential. The gradient is checked against central
    /// differences at a fixed pseudo-random sample of `[-1, 1]^3`.
    pub fn custom<V, G>(value: V, gradient: G) -> Result<Self>
    where
        V: Fn(&State) -> f64 + Send + Sync + 'static,
        G: Fn(&State) -> Vec3 + Send + Sync + 'static,
    {
        let mut rng = ChaCha8Rng::seed_from_u64(CUSTOM_CHECK_SEED);
        for _ in 0..CUSTOM_CHECK_POINTS {
            let x = State::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let analytic = gradient(&x);
            let numeric = fd_gradient(&value, &x, FD_STEP);
            let error = (0..3)
                .map(|i| (analytic[i] - numeric[i]).abs() / analytic[i].abs().max(1.0))
                .fold(0.0, f64::max);
            if !(error <= FD_TOLERANCE) {
                return Err(Error::GradientMismatch {
                    at: x.to_array(),
                    error,
                });
            }
        }
        Ok(Potential {
            kind: PotentialKind::Custom {
                value: Arc::new(value),
                gradient: Arc::new(gradient),
            },
        })
    }

    pub fn from_spec(spec: &PotentialSpec) -> Result<Self> {
        match *spec {
            PotentialSpec::Quadratic { c } => Potential::quadratic(c[0], c[1], c[2]),
            PotentialSpec::VAlpha { alpha } => Potential::v_alpha(alpha),
        }
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    /// Diagonal coefficients for the quadratic kinds.
    pub fn coefficients(&self) -> Option<[f64; 3]> {
        match self.kind {
            PotentialKind::Quadratic { c } => Some(c),
            PotentialKind::VAlpha { alpha } => Some([alpha, 1.0 / alpha, alpha]),
            PotentialKind::Custom { .. } => None,
        }
    }

    /// `factor * V`. Quadratic kinds stay quadratic.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::param("factor", format!("must be positive, got {factor}")));
        }
        match &self.kind {
            PotentialKind::Custom { value, gradient } => {
                let (value, gradient) = (value.clone(), gradient.clone());
                Ok(Potential {
                    kind: PotentialKind::Custom {
                        value: Arc::new(move |x| factor * value(x)),
                        gradient: Arc::new(move |x| gradient(x).map(|g| factor * g)),
                    },
                })
            }
            _ => {
                let c = self.coefficients().expect("quadratic kind");
                Potential::quadratic(factor * c[0], factor * c[1], factor * c[2])
            }
        }
    }

    pub fn value(&self, x: &State) -> f64 {
        match &self.kind {
            PotentialKind::Custom { value, .. } => value(x),
            _ => {
                let c = self.coefficients().expect("quadratic kind");
                c[0] * x.x1 * x.x1 + c[1] * x.x2 * x.x2 + c[2] * x.x3 * x.x3
            }
        }
    }

    pub fn gradient(&self, x: &State) -> Vec3 {
        match &self.kind {
            PotentialKind::Custom { gradient, .. } => gradient(x),
            _ => {
                let c = self.coefficients().expect("quadratic kind");
                [2.0 * c[0] * x.x1, 2.0 * c[1] * x.x2, 2.0 * c[2] * x.x3]
            }
        }
    }
}

/// Serialized form of a potential in config files:
/// `{"kind":"v_alpha","alpha":4.0}` or `{"kind":"quadratic","c":[2,1,1]}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    Quadratic { c: [f64; 3] },
    VAlpha { alpha: f64 },
}

/// Amplitudes `(a1, a2, a12)` of the feedback along `f1`, `f2` and `[f1, f2]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AmplitudeVector {
    pub a1: f64,
    pub a2: f64,
    pub a12: f64,
}

impl AmplitudeVector {
    pub const ZERO: AmplitudeVector = AmplitudeVector {
        a1: 0.0,
        a2: 0.0,
        a12: 0.0,
    };

    pub fn to_array(self) -> Vec3 {
        [self.a1, self.a2, self.a12]
    }
}

/// Componentwise formulas for `a(x)`.
pub fn amplitude_vector(v: &Potential, gamma: f64, x: &State) -> AmplitudeVector {
    amplitude_from_gradient(v.gradient(x), gamma, x)
}

pub fn amplitude_from_gradient(g: Vec3, gamma: f64, x: &State) -> AmplitudeVector {
    let (s, c) = x.x3.sin_cos();
    AmplitudeVector {
        a1: -gamma * (g[0] * c + g[1] * s),
        a2: -gamma * g[2],
        a12: -gamma * (g[0] * s - g[1] * c),
    }
}

/// Matrix route `a(x) = -gamma F^{-1}(x) grad V(x)^T`.
pub fn amplitude_vector_matrix(v: &Potential, gamma: f64, x: &State) -> AmplitudeVector {
    let a = mat_vec(&frame_inverse(x), v.gradient(x));
    AmplitudeVector {
        a1: -gamma * a[0],
        a2: -gamma * a[1],
        a12: -gamma * a[2],
    }
}

pub(crate) fn fd_gradient(value: impl Fn(&State) -> f64, x: &State, h: f64) -> Vec3 {
    let mut g = [0.0; 3];
    for (i, gi) in g.iter_mut().enumerate() {
        let mut plus = x.to_array();
        let mut minus = x.to_array();
        plus[i] += h;
        minus[i] -= h;
        *gi = (value(&State::from(plus)) - value(&State::from(minus))) / (2.0 * h);
    }
    g
}
