//! Homotopy continuation for small square polynomial systems.
//!
//! Two families are supported. The total-degree homotopy deforms the start
//! system `x_i^{d_i} - x_0^{d_i} = 0` into the target along
//! `H(x, t) = (1 - t) g G(x) + t F(x)` with a random complex constant `g`,
//! so every isolated solution of `F` is the endpoint of one of the
//! `prod d_i` paths with probability one. The parameter homotopy moves the
//! coefficients of a parametrized system along a straight line from a
//! generic complex instance with known solutions to the target instance, and
//! tracks only as many paths as the generic instance has solutions.
//!
//! Equations are homogenized with an extra coordinate `x_0` and tracked on a
//! random affine chart of projective space, so paths heading to very large
//! solutions stay bounded. Paths are followed with a fourth-order
//! Runge-Kutta predictor and a Newton corrector under adaptive step control.

use nalgebra::{Complex, DMatrix, DVector, SMatrix, SVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::poly::{mono_degree, Mono, Poly, MAX_VARS};

pub type C64 = Complex<f64>;

/// Step and divergence limits of the path tracker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerOptions {
    pub initial_step: f64,
    pub min_step: f64,
    pub max_step: f64,
    pub max_steps: usize,
    /// Paths whose norm exceeds this are treated as diverging.
    pub divergence: f64,
    /// Paths stalling after this time are still handed to the final Newton
    /// refinement, which recovers ill-conditioned endpoints.
    pub endgame_start: f64,
    pub seed: u64,
}

impl Default for TrackerOptions {
    fn default() -> Self {
        Self {
            initial_step: 0.02,
            min_step: 1e-12,
            max_step: 0.1,
            max_steps: 5000,
            divergence: 1e9,
            endgame_start: 0.9,
            seed: 0x6a09_e667,
        }
    }
}

/// A term whose coefficient is a polynomial in the path variable
/// `s = 2 t - 1`, lowest power first.
#[derive(Debug, Clone)]
struct Term {
    mono: Mono,
    coef: Vec<C64>,
}

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

/// Homogeneous equations in `nvars + 1` variables (the homogenizing
/// coordinate last) with coefficients depending polynomially on `t`.
#[derive(Debug, Clone)]
struct PathFamily {
    nvars: usize,
    maxdeg: usize,
    eqs: Vec<Vec<Term>>,
    chart: Vec<C64>,
}

/// Term coefficients of a [`PathFamily`] at one time.
struct Coefficients {
    value: Vec<C64>,
    slope: Vec<C64>,
}

/// Tracker state: projective coordinates padded with zeros to a fixed size,
/// so the linear algebra runs on the stack.
type Vec6 = SVector<C64, DIM>;
type Mat6 = SMatrix<C64, DIM, DIM>;
const DIM: usize = MAX_VARS;
const MAX_POWER: usize = 16;

/// Newton steps of the corrector must shrink below this fraction of the
/// point norm.
const CORRECTOR_TOL: f64 = 1e-8;

impl PathFamily {
    fn dim(&self) -> usize {
        self.nvars + 1
    }

    fn powers(&self, x: &Vec6) -> [[C64; MAX_POWER]; DIM] {
        let mut pw = [[zero(); MAX_POWER]; DIM];
        for k in 0..self.dim() {
            pw[k][0] = C64::new(1.0, 0.0);
            for e in 1..=self.maxdeg {
                pw[k][e] = pw[k][e - 1] * x[k];
            }
        }
        pw
    }

    /// Term coefficients and their `t` derivatives at time `t`, in the order
    /// of `eqs`.
    fn coefficients(&self, t: f64) -> Coefficients {
        let s = 2.0 * t - 1.0;
        let mut value = Vec::new();
        let mut slope = Vec::new();
        for term in self.eqs.iter().flatten() {
            let (mut c, mut dc) = (zero(), zero());
            for a in term.coef.iter().rev() {
                dc = dc * s + c;
                c = c * s + a;
            }
            value.push(c);
            slope.push(dc * 2.0);
        }
        Coefficients { value, slope }
    }

    /// `H`, `dH/dx` and `dH/dt` at `x` for the coefficients of one time, with
    /// the chart equation last. Padding rows and columns hold the identity.
    fn eval(&self, x: &Vec6, coefs: &Coefficients) -> (Vec6, Mat6, Vec6) {
        let n = self.dim();
        let pw = self.powers(x);
        let mut h = Vec6::zeros();
        let mut jh = Mat6::identity();
        let mut ht = Vec6::zeros();
        let mut j = 0;
        for (i, eq) in self.eqs.iter().enumerate() {
            jh[(i, i)] = zero();
            for term in eq {
                let (c, dc) = (coefs.value[j], coefs.slope[j]);
                j += 1;
                let m = &term.mono;
                // prefix[k] is the product of the factors before k.
                let mut prefix = [C64::new(1.0, 0.0); DIM + 1];
                for k in 0..n {
                    prefix[k + 1] = prefix[k] * pw[k][m[k] as usize];
                }
                let value = prefix[n];
                h[i] += c * value;
                ht[i] += dc * value;
                let mut suffix = c;
                for k in (0..n).rev() {
                    if m[k] > 0 {
                        jh[(i, k)] += suffix * prefix[k] * (m[k] as f64) * pw[k][m[k] as usize - 1];
                    }
                    suffix *= pw[k][m[k] as usize];
                }
            }
        }
        let last = n - 1;
        h[last] = (0..n).map(|k| self.chart[k] * x[k]).sum::<C64>() - C64::new(1.0, 0.0);
        for k in 0..n {
            jh[(last, k)] = self.chart[k];
        }
        (h, jh, ht)
    }

    fn tangent(&self, x: &Vec6, coefs: &Coefficients) -> Option<Vec6> {
        let (_, jh, ht) = self.eval(x, coefs);
        let v = jh.lu().solve(&ht)?;
        Some(-v)
    }

    /// Scales an affine point `(x, 1)` onto the chart.
    fn lift(&self, affine: &[C64]) -> Vec6 {
        let n = self.dim();
        let mut p = Vec6::zeros();
        for (k, z) in affine.iter().enumerate() {
            p[k] = *z;
        }
        p[n - 1] = C64::new(1.0, 0.0);
        let s: C64 = (0..n).map(|k| self.chart[k] * p[k]).sum();
        p / s
    }

    fn track(&self, start: Vec6, opts: &TrackerOptions) -> Option<Vec6> {
        let mut x = start;
        let mut t = 0.0;
        let mut h = opts.initial_step;
        let mut streak = 0;
        let mut now = self.coefficients(0.0);
        let two = C64::new(2.0, 0.0);
        for _ in 0..opts.max_steps {
            if t >= 1.0 {
                break;
            }
            let step = h.min(1.0 - t);
            let half = C64::new(step / 2.0, 0.0);
            let full = C64::new(step, 0.0);
            let mid = self.coefficients(t + step / 2.0);
            let end = self.coefficients(t + step);
            let predicted = (|| {
                let k1 = self.tangent(&x, &now)?;
                let k2 = self.tangent(&(x + k1 * half), &mid)?;
                let k3 = self.tangent(&(x + k2 * half), &mid)?;
                let k4 = self.tangent(&(x + k3 * full), &end)?;
                Some(x + (k1 + k2 * two + k3 * two + k4) * C64::new(step / 6.0, 0.0))
            })();
            let corrected = predicted.and_then(|mut y| {
                let mut last = f64::INFINITY;
                for _ in 0..3 {
                    let (hv, jh, _) = self.eval(&y, &end);
                    let dx = jh.lu().solve(&hv)?;
                    y -= dx;
                    let size = dx.norm();
                    if size > 0.5 * last && last > 1e-12 * y.norm() {
                        return None;
                    }
                    if size <= CORRECTOR_TOL * y.norm() {
                        return Some(y);
                    }
                    last = size;
                }
                None
            });
            match corrected {
                Some(y) => {
                    x = y;
                    now = end;
                    t += step;
                    streak += 1;
                    if streak >= 3 {
                        h = (h * 2.0).min(opts.max_step);
                        streak = 0;
                    }
                    if x.norm() > opts.divergence {
                        return None;
                    }
                }
                None => {
                    h /= 2.0;
                    streak = 0;
                    if h < opts.min_step {
                        break;
                    }
                }
            }
        }
        (t >= opts.endgame_start).then_some(x)
    }

    /// Affine endpoints of the paths from `starts` (projective points on the
    /// chart); `None` for paths that fail or end at infinity.
    fn endpoints(&self, starts: Vec<Vec6>, opts: &TrackerOptions) -> Vec<Option<Vec<C64>>> {
        let n = self.nvars;
        starts
            .into_iter()
            .map(|s| {
                let x = self.track(s, opts)?;
                let scale = x.iter().map(|z| z.norm()).fold(0.0, f64::max);
                if x[n].norm() <= 1e-10 * scale {
                    return None;
                }
                let y: Vec<C64> = (0..n).map(|k| x[k] / x[n]).collect();
                y.iter().all(|z| z.re.is_finite() && z.im.is_finite()).then_some(y)
            })
            .collect()
    }
}

fn random_unit(rng: &mut ChaCha8Rng) -> C64 {
    C64::from_polar(1.0, rng.gen_range(0.0..std::f64::consts::TAU))
}

fn random_chart(nvars: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
    (0..=nvars).map(|_| random_unit(rng)).collect()
}

fn max_exponent(eqs: &[Vec<Term>]) -> usize {
    let m = eqs
        .iter()
        .flatten()
        .flat_map(|t| t.mono.iter().copied())
        .max()
        .unwrap_or(0) as usize;
    assert!(m < MAX_POWER, "exponent {m} too large for the path tracker");
    m
}

/// Newton refinement of an affine point on a complex system.
pub fn affine_newton(eqs: &[Poly<C64>], x: &mut [C64], iters: usize) {
    let n = x.len();
    let jac: Vec<Vec<Poly<C64>>> = eqs.iter().map(|e| (0..n).map(|v| e.derivative(v)).collect()).collect();
    for _ in 0..iters {
        let f = DVector::from_iterator(n, eqs.iter().map(|e| e.eval(x)));
        let j = DMatrix::from_fn(n, n, |i, k| jac[i][k].eval(x));
        let Some(dx) = j.lu().solve(&f) else { break };
        for i in 0..n {
            x[i] -= dx[i];
        }
        if dx.norm() <= 1e-15 * (1.0 + x.iter().map(|z| z.norm()).sum::<f64>()) {
            break;
        }
    }
}

pub fn to_complex(p: &Poly<f64>) -> Poly<C64> {
    p.map_coeffs(|c| C64::new(c, 0.0))
}

/// A square system solved by the total-degree homotopy.
pub struct ComplexSystem {
    nvars: usize,
    degrees: Vec<u32>,
    target: Vec<Poly<C64>>,
}

impl ComplexSystem {
    pub fn new(eqs: &[Poly<f64>]) -> Self {
        Self::from_complex(eqs.iter().map(to_complex).collect())
    }

    pub fn from_complex(eqs: Vec<Poly<C64>>) -> Self {
        let nvars = eqs.first().map_or(0, |e| e.nvars);
        assert_eq!(eqs.len(), nvars, "homotopy needs a square system");
        assert!(nvars < MAX_VARS, "too many variables for homogenization");
        Self {
            nvars,
            degrees: eqs.iter().map(|e| e.degree()).collect(),
            target: eqs,
        }
    }

    /// Number of paths of the total-degree homotopy.
    pub fn bezout_number(&self) -> usize {
        self.degrees.iter().map(|&d| d as usize).product()
    }

    fn family(&self, gamma: C64, chart: Vec<C64>) -> PathFamily {
        let n = self.nvars;
        // In s = 2t - 1, t = (1 + s) / 2 and 1 - t = (1 - s) / 2.
        let half = C64::new(0.5, 0.0);
        let eqs: Vec<Vec<Term>> = self
            .target
            .iter()
            .zip(&self.degrees)
            .enumerate()
            .map(|(i, (f, &d))| {
                let mut terms: Vec<Term> = f
                    .terms
                    .iter()
                    .map(|(m, c)| {
                        let mut mono = *m;
                        mono[n] = (d - mono_degree(m)) as u8;
                        Term {
                            mono,
                            coef: vec![c * half, c * half],
                        }
                    })
                    .collect();
                let mut push = |mono: Mono, c: C64| {
                    let g = [c * half, -c * half];
                    if let Some(t) = terms.iter_mut().find(|t| t.mono == mono) {
                        t.coef[0] += g[0];
                        t.coef[1] += g[1];
                    } else {
                        terms.push(Term { mono, coef: g.to_vec() });
                    }
                };
                let mut xi = [0u8; MAX_VARS];
                xi[i] = d as u8;
                push(xi, gamma);
                let mut x0 = [0u8; MAX_VARS];
                x0[n] = d as u8;
                push(x0, -gamma);
                terms
            })
            .collect();
        PathFamily {
            nvars: n,
            maxdeg: max_exponent(&eqs),
            eqs,
            chart,
        }
    }

    fn start_solutions(&self) -> Vec<Vec<C64>> {
        let mut out: Vec<Vec<C64>> = vec![Vec::new()];
        for &d in &self.degrees {
            let roots: Vec<C64> = (0..d)
                .map(|k| C64::from_polar(1.0, std::f64::consts::TAU * k as f64 / d as f64))
                .collect();
            out = out
                .into_iter()
                .flat_map(|p| {
                    roots.iter().map(move |r| {
                        let mut q = p.clone();
                        q.push(*r);
                        q
                    })
                })
                .collect();
        }
        out
    }

    /// Endpoints of all paths that reach, or stall close to, `t = 1` at finite
    /// points, refined by Newton's method on the target system. Callers should
    /// check residuals since stalled paths may end near singular components.
    pub fn solve(&self, opts: &TrackerOptions) -> Vec<Vec<C64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let gamma = random_unit(&mut rng);
        let family = self.family(gamma, random_chart(self.nvars, &mut rng));
        let starts = self.start_solutions().iter().map(|s| family.lift(s)).collect();
        family
            .endpoints(starts, opts)
            .into_iter()
            .flatten()
            .map(|mut y| {
                affine_newton(&self.target, &mut y, 10);
                y
            })
            .filter(|y| y.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
            .collect()
    }
}

/// A family of systems whose coefficients are polynomials of bounded degree
/// in `t`, with known solutions at `t = 0`.
pub struct ParameterHomotopy {
    family: PathFamily,
}

impl ParameterHomotopy {
    /// Interpolates the coefficients of `system(t)`, a square system whose
    /// coefficients have degree at most `degree` in `t`.
    pub fn interpolate(degree: usize, seed: u64, system: impl Fn(f64) -> Vec<Poly<C64>>) -> Self {
        // Chebyshev nodes in s = 2t - 1 keep the Vandermonde system well conditioned.
        let nodes: Vec<f64> = (0..=degree)
            .map(|k| ((2 * k + 1) as f64 * std::f64::consts::PI / (2 * degree + 2) as f64).cos())
            .collect();
        let samples: Vec<Vec<Poly<C64>>> = nodes.iter().map(|&s| system((s + 1.0) / 2.0)).collect();
        let nvars = samples[0].first().map_or(0, |e| e.nvars);
        assert!(nvars < MAX_VARS, "too many variables for homogenization");
        let vandermonde = DMatrix::from_fn(degree + 1, degree + 1, |i, j| C64::new(nodes[i].powi(j as i32), 0.0));
        let lu = vandermonde.lu();
        let eqs: Vec<Vec<Term>> = (0..samples[0].len())
            .map(|i| {
                let mut support: Vec<Mono> = samples.iter().flat_map(|s| s[i].terms.keys().copied()).collect();
                support.sort();
                support.dedup();
                let deg = support.iter().map(mono_degree).max().unwrap_or(0);
                support
                    .into_iter()
                    .map(|m| {
                        let values = DVector::from_iterator(
                            degree + 1,
                            samples.iter().map(|s| s[i].terms.get(&m).copied().unwrap_or_else(zero)),
                        );
                        let coef = lu.solve(&values).expect("Chebyshev Vandermonde matrix is invertible");
                        let mut mono = m;
                        mono[nvars] = (deg - mono_degree(&m)) as u8;
                        Term {
                            mono,
                            coef: coef.iter().copied().collect(),
                        }
                    })
                    .collect()
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            family: PathFamily {
                nvars,
                maxdeg: max_exponent(&eqs),
                eqs,
                chart: random_chart(nvars, &mut rng),
            },
        }
    }

    /// Tracks each start solution of the `t = 0` system to `t = 1`. Entries
    /// are `None` for paths that fail or leave for infinity.
    pub fn track(&self, starts: &[Vec<C64>], opts: &TrackerOptions) -> Vec<Option<Vec<C64>>> {
        let lifted = starts.iter().map(|s| self.family.lift(s)).collect();
        self.family.endpoints(lifted, opts)
    }
}

/// Real parts of the endpoints whose imaginary parts are negligible.
pub fn real_endpoints(endpoints: &[Vec<C64>], tol: f64) -> Vec<Vec<f64>> {
    endpoints
        .iter()
        .filter(|x| {
            let scale = 1.0 + x.iter().map(|z| z.norm()).fold(0.0, f64::max);
            x.iter().all(|z| z.im.abs() <= tol * scale)
        })
        .map(|x| x.iter().map(|z| z.re).collect())
        .collect()
}
