//! Sparse multivariate polynomials over a generic coefficient field.
//!
//! Used to assemble the small polynomial systems of the solvers, to build
//! Macaulay matrices, and (over a prime field) to analyse systems offline
//! when producing solver templates.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};

pub const MAX_VARS: usize = 6;

/// Exponent vector; unused trailing slots are zero.
pub type Mono = [u8; MAX_VARS];

pub trait Field:
    Copy + PartialEq + Debug + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn inv(&self) -> Self;
    fn from_i64(v: i64) -> Self;
}

impl Field for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn inv(&self) -> Self {
        1.0 / self
    }
    fn from_i64(v: i64) -> Self {
        v as f64
    }
}

impl Field for nalgebra::Complex<f64> {
    fn zero() -> Self {
        Self::new(0.0, 0.0)
    }
    fn one() -> Self {
        Self::new(1.0, 0.0)
    }
    fn is_zero(&self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }
    fn inv(&self) -> Self {
        Self::new(1.0, 0.0) / self
    }
    fn from_i64(v: i64) -> Self {
        Self::new(v as f64, 0.0)
    }
}

/// Element of the prime field of order `Fp::P`.
#[derive(Copy, Clone, PartialEq, Eq, Hash, Debug, PartialOrd, Ord)]
pub struct Fp(pub u64);

impl Fp {
    pub const P: u64 = 2_147_483_647;

    pub fn new(v: u64) -> Self {
        Fp(v % Self::P)
    }

    pub fn pow(self, mut e: u64) -> Self {
        let mut base = self;
        let mut acc = Fp(1);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            e >>= 1;
        }
        acc
    }
}

impl Add for Fp {
    type Output = Fp;
    fn add(self, o: Fp) -> Fp {
        let s = self.0 + o.0;
        Fp(if s >= Self::P { s - Self::P } else { s })
    }
}

impl Sub for Fp {
    type Output = Fp;
    fn sub(self, o: Fp) -> Fp {
        Fp(if self.0 >= o.0 { self.0 - o.0 } else { self.0 + Self::P - o.0 })
    }
}

impl Mul for Fp {
    type Output = Fp;
    fn mul(self, o: Fp) -> Fp {
        Fp(self.0 * o.0 % Self::P)
    }
}

impl Neg for Fp {
    type Output = Fp;
    fn neg(self) -> Fp {
        Fp(if self.0 == 0 { 0 } else { Self::P - self.0 })
    }
}

impl Field for Fp {
    fn zero() -> Self {
        Fp(0)
    }
    fn one() -> Self {
        Fp(1)
    }
    fn is_zero(&self) -> bool {
        self.0 == 0
    }
    fn inv(&self) -> Self {
        assert!(self.0 != 0, "inverse of zero in prime field");
        self.pow(Self::P - 2)
    }
    fn from_i64(v: i64) -> Self {
        let m = v.rem_euclid(Self::P as i64);
        Fp(m as u64)
    }
}

pub fn mono_degree(m: &Mono) -> u32 {
    m.iter().map(|&e| e as u32).sum()
}

pub fn mono_mul(a: &Mono, b: &Mono) -> Mono {
    let mut r = [0u8; MAX_VARS];
    for i in 0..MAX_VARS {
        r[i] = a[i] + b[i];
    }
    r
}

/// `a / b` when `b` divides `a`.
pub fn mono_div(a: &Mono, b: &Mono) -> Option<Mono> {
    let mut r = [0u8; MAX_VARS];
    for i in 0..MAX_VARS {
        r[i] = a[i].checked_sub(b[i])?;
    }
    Some(r)
}

pub fn mono_var(i: usize) -> Mono {
    let mut m = [0u8; MAX_VARS];
    m[i] = 1;
    m
}

/// Graded reverse lexicographic order on the first `nvars` variables.
pub fn grevlex_cmp(a: &Mono, b: &Mono) -> Ordering {
    match mono_degree(a).cmp(&mono_degree(b)) {
        Ordering::Equal => {}
        o => return o,
    }
    for i in (0..MAX_VARS).rev() {
        match a[i].cmp(&b[i]) {
            Ordering::Equal => continue,
            o => return o.reverse(),
        }
    }
    Ordering::Equal
}

/// All monomials in `nvars` variables with total degree at most `deg`.
pub fn monomials_up_to(nvars: usize, deg: u32) -> Vec<Mono> {
    let mut out = Vec::new();
    let mut cur = [0u8; MAX_VARS];
    fn rec(i: usize, nvars: usize, left: u32, cur: &mut Mono, out: &mut Vec<Mono>) {
        if i == nvars {
            out.push(*cur);
            return;
        }
        for e in 0..=left {
            cur[i] = e as u8;
            rec(i + 1, nvars, left - e, cur, out);
        }
        cur[i] = 0;
    }
    rec(0, nvars, deg, &mut cur, &mut out);
    out
}

#[derive(Clone, PartialEq, Debug)]
pub struct Poly<C: Field> {
    pub nvars: usize,
    pub terms: BTreeMap<Mono, C>,
}

impl<C: Field> Poly<C> {
    pub fn zero(nvars: usize) -> Self {
        assert!(nvars <= MAX_VARS);
        Self {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: C) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term([0; MAX_VARS], c);
        p
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        assert!(i < nvars);
        let mut p = Self::zero(nvars);
        p.add_term(mono_var(i), C::one());
        p
    }

    pub fn term(nvars: usize, m: Mono, c: C) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(m, c);
        p
    }

    pub fn add_term(&mut self, m: Mono, c: C) {
        if c.is_zero() {
            return;
        }
        let e = self.terms.entry(m).or_insert(C::zero());
        *e = *e + c;
        if e.is_zero() {
            self.terms.remove(&m);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(mono_degree).max().unwrap_or(0)
    }

    pub fn degree_in(&self, var: usize) -> u32 {
        self.terms.keys().map(|m| m[var] as u32).max().unwrap_or(0)
    }

    pub fn scale(&self, c: C) -> Self {
        let mut out = Self::zero(self.nvars);
        for (m, &v) in &self.terms {
            out.add_term(*m, v * c);
        }
        out
    }

    pub fn mul_mono(&self, m: &Mono, c: C) -> Self {
        let mut out = Self::zero(self.nvars);
        for (k, &v) in &self.terms {
            out.add_term(mono_mul(k, m), v * c);
        }
        out
    }

    pub fn eval(&self, x: &[C]) -> C {
        let mut acc = C::zero();
        for (m, &c) in &self.terms {
            let mut t = c;
            for (i, &e) in m.iter().enumerate().take(self.nvars) {
                for _ in 0..e {
                    t = t * x[i];
                }
            }
            acc = acc + t;
        }
        acc
    }

    pub fn derivative(&self, var: usize) -> Self {
        let mut out = Self::zero(self.nvars);
        for (m, &c) in &self.terms {
            if m[var] > 0 {
                let mut k = *m;
                k[var] -= 1;
                out.add_term(k, c * C::from_i64(m[var] as i64));
            }
        }
        out
    }

    /// Coefficient polynomials of the powers of `var`; entry `k` multiplies
    /// `var^k` and no longer contains `var`.
    pub fn split_by(&self, var: usize) -> Vec<Self> {
        let mut out = vec![Self::zero(self.nvars); self.degree_in(var) as usize + 1];
        for (m, &c) in &self.terms {
            let mut k = *m;
            let e = k[var] as usize;
            k[var] = 0;
            out[e].add_term(k, c);
        }
        out
    }

    /// Homogenizes with respect to the variables in `vars`, using `hvar` to
    /// pad every term to total degree `deg` in those variables.
    pub fn homogenize(&self, vars: &[usize], hvar: usize, deg: u32) -> Self {
        let mut out = Self::zero(self.nvars);
        for (m, &c) in &self.terms {
            let d: u32 = vars.iter().map(|&v| m[v] as u32).sum();
            assert!(d <= deg, "term degree exceeds homogenization degree");
            let mut k = *m;
            k[hvar] += (deg - d) as u8;
            out.add_term(k, c);
        }
        out
    }

    /// Leading term in grevlex order.
    pub fn leading(&self) -> Option<(Mono, C)> {
        self.terms
            .iter()
            .max_by(|a, b| grevlex_cmp(a.0, b.0))
            .map(|(m, c)| (*m, *c))
    }

    /// Exact division by `d`: returns the quotient when the remainder of
    /// multivariate division is zero.
    pub fn divide_exact(&self, d: &Self) -> Option<Self> {
        let (lm, lc) = d.leading()?;
        let inv = lc.inv();
        let mut rem = self.clone();
        let mut quot = Self::zero(self.nvars);
        while let Some((m, c)) = rem.leading() {
            let q = mono_div(&m, &lm)?;
            let coef = c * inv;
            quot.add_term(q, coef);
            rem = &rem - &d.mul_mono(&q, coef);
        }
        Some(quot)
    }

    pub fn map_coeffs<D: Field>(&self, f: impl Fn(C) -> D) -> Poly<D> {
        let mut out = Poly::zero(self.nvars);
        for (m, &c) in &self.terms {
            out.add_term(*m, f(c));
        }
        out
    }
}

impl<'a, C: Field> Add for &'a Poly<C> {
    type Output = Poly<C>;
    fn add(self, o: &'a Poly<C>) -> Poly<C> {
        let mut out = self.clone();
        for (m, &c) in &o.terms {
            out.add_term(*m, c);
        }
        out
    }
}

impl<'a, C: Field> Sub for &'a Poly<C> {
    type Output = Poly<C>;
    fn sub(self, o: &'a Poly<C>) -> Poly<C> {
        let mut out = self.clone();
        for (m, &c) in &o.terms {
            out.add_term(*m, -c);
        }
        out
    }
}

impl<'a, C: Field> Mul for &'a Poly<C> {
    type Output = Poly<C>;
    fn mul(self, o: &'a Poly<C>) -> Poly<C> {
        let mut out = Poly::zero(self.nvars);
        for (ma, &ca) in &self.terms {
            for (mb, &cb) in &o.terms {
                out.add_term(mono_mul(ma, mb), ca * cb);
            }
        }
        out
    }
}

impl<C: Field> Add for Poly<C> {
    type Output = Poly<C>;
    fn add(self, o: Poly<C>) -> Poly<C> {
        &self + &o
    }
}

impl<C: Field> Sub for Poly<C> {
    type Output = Poly<C>;
    fn sub(self, o: Poly<C>) -> Poly<C> {
        &self - &o
    }
}

impl<C: Field> Mul for Poly<C> {
    type Output = Poly<C>;
    fn mul(self, o: Poly<C>) -> Poly<C> {
        &self * &o
    }
}

impl<C: Field> Neg for Poly<C> {
    type Output = Poly<C>;
    fn neg(self) -> Poly<C> {
        self.scale(-C::one())
    }
}

impl Poly<f64> {
    /// `|p(x)|` divided by the sum of the absolute values of its terms at
    /// `x`; zero means the polynomial vanishes up to rounding.
    pub fn relative_eval(&self, x: &[f64]) -> f64 {
        let (mut val, mut mag) = (0.0, 0.0);
        for (m, &c) in &self.terms {
            let mut t = c;
            for (i, &e) in m.iter().enumerate().take(self.nvars) {
                t *= x[i].powi(e as i32);
            }
            val += t;
            mag += t.abs();
        }
        if mag == 0.0 {
            0.0
        } else {
            val.abs() / mag
        }
    }

    /// Division by `d` for floating-point polynomials that are divisible up
    /// to rounding. Remainder terms below `tol` times the largest coefficient
    /// of `self` are discarded; `None` when a larger term cannot be divided.
    pub fn divide_approx(&self, d: &Self, tol: f64) -> Option<Self> {
        let (lm, lc) = d.leading()?;
        let floor = tol * self.terms.values().fold(0.0f64, |a, c| a.max(c.abs()));
        let mut rem = self.clone();
        let mut quot = Self::zero(self.nvars);
        loop {
            rem.terms.retain(|_, c| c.abs() > floor);
            let Some((m, c)) = rem.leading() else { break };
            let q = mono_div(&m, &lm)?;
            let coef = c / lc;
            quot.add_term(q, coef);
            rem = &rem - &d.mul_mono(&q, coef);
            rem.terms.remove(&m);
        }
        Some(quot)
    }
}

/// Polynomial flattened into a term list for fast repeated evaluation.
#[derive(Debug, Clone)]
pub struct FlatPoly {
    terms: Vec<(Mono, f64)>,
}

const MAX_POW: usize = 24;

/// Powers `x_i^k` of every variable, shared by the terms of a system.
struct Powers([[f64; MAX_POW]; MAX_VARS]);

impl Powers {
    fn new(x: &[f64], maxdeg: usize) -> Self {
        let mut p = [[0.0; MAX_POW]; MAX_VARS];
        for (i, &v) in x.iter().enumerate().take(MAX_VARS) {
            p[i][0] = 1.0;
            for k in 1..=maxdeg.min(MAX_POW - 1) {
                p[i][k] = p[i][k - 1] * v;
            }
        }
        Powers(p)
    }
}

impl FlatPoly {
    pub fn new(p: &Poly<f64>) -> Self {
        Self {
            terms: p.terms.iter().map(|(m, c)| (*m, *c)).collect(),
        }
    }

    fn eval_pw(&self, pw: &Powers, nvars: usize) -> (f64, f64) {
        let (mut val, mut mag) = (0.0, 0.0);
        for (m, c) in &self.terms {
            let mut t = *c;
            for i in 0..nvars {
                t *= pw.0[i][m[i] as usize];
            }
            val += t;
            mag += t.abs();
        }
        (val, mag)
    }
}

/// A square or overdetermined polynomial system with its Jacobian, set up
/// for Newton-type refinement.
#[derive(Debug, Clone)]
pub struct PolySystem {
    nvars: usize,
    maxdeg: usize,
    eqs: Vec<FlatPoly>,
    jac: Vec<Vec<FlatPoly>>,
}

impl PolySystem {
    pub fn new(eqs: &[Poly<f64>]) -> Self {
        let nvars = eqs.first().map_or(0, |e| e.nvars);
        let maxdeg = eqs
            .iter()
            .flat_map(|e| e.terms.keys())
            .flat_map(|m| m.iter().copied())
            .max()
            .unwrap_or(0) as usize;
        assert!(maxdeg < MAX_POW, "degree too high for flat evaluation");
        Self {
            nvars,
            maxdeg,
            eqs: eqs.iter().map(FlatPoly::new).collect(),
            jac: eqs
                .iter()
                .map(|e| (0..nvars).map(|v| FlatPoly::new(&e.derivative(v))).collect())
                .collect(),
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn len(&self) -> usize {
        self.eqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eqs.is_empty()
    }

    pub fn residual(&self, x: &[f64]) -> nalgebra::DVector<f64> {
        let pw = Powers::new(x, self.maxdeg);
        nalgebra::DVector::from_iterator(self.eqs.len(), self.eqs.iter().map(|e| e.eval_pw(&pw, self.nvars).0))
    }

    /// Largest per-equation relative residual (see [`Poly::relative_eval`]).
    pub fn relative_residual(&self, x: &[f64]) -> f64 {
        let pw = Powers::new(x, self.maxdeg);
        self.eqs
            .iter()
            .map(|e| {
                let (v, m) = e.eval_pw(&pw, self.nvars);
                if m == 0.0 {
                    0.0
                } else {
                    v.abs() / m
                }
            })
            .fold(0.0, f64::max)
    }

    pub fn residual_and_jacobian(&self, x: &[f64]) -> (nalgebra::DVector<f64>, nalgebra::DMatrix<f64>) {
        let pw = Powers::new(x, self.maxdeg);
        let r = nalgebra::DVector::from_iterator(self.eqs.len(), self.eqs.iter().map(|e| e.eval_pw(&pw, self.nvars).0));
        let j = nalgebra::DMatrix::from_fn(self.eqs.len(), self.nvars, |i, k| self.jac[i][k].eval_pw(&pw, self.nvars).0);
        (r, j)
    }

    /// Plain Newton (Gauss-Newton when overdetermined) steps, accepted only
    /// while the residual norm decreases.
    pub fn polish(&self, x: &mut [f64], iters: usize) {
        let mut r = self.residual(x);
        for _ in 0..iters {
            let (_, j) = self.residual_and_jacobian(x);
            let dx = if j.nrows() == j.ncols() {
                j.clone().lu().solve(&r)
            } else {
                j.clone().svd(true, true).solve(&r, 1e-15).ok()
            };
            let Some(dx) = dx else { return };
            let cand: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, d)| a - d).collect();
            let rc = self.residual(&cand);
            if rc.norm() < r.norm() {
                x.copy_from_slice(&cand);
                r = rc;
                if dx.norm() <= 1e-16 * (1.0 + nalgebra::DVector::from_column_slice(x).norm()) {
                    return;
                }
            } else {
                return;
            }
        }
    }

    /// Levenberg-Marquardt from `x`; returns true when the residual is
    /// driven to `tol` in the relative sense.
    pub fn levenberg_marquardt(&self, x: &mut [f64], max_iters: usize, tol: f64) -> bool {
        let mut lambda = 1e-3;
        let (mut r, mut j) = self.residual_and_jacobian(x);
        let mut cost = r.norm_squared();
        for _ in 0..max_iters {
            if !cost.is_finite() {
                return false;
            }
            if self.relative_residual(x) <= tol {
                return true;
            }
            let Some(dx) = crate::linalg::damped_solve(&j, &r, lambda) else {
                return false;
            };
            let cand: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, d)| a - d).collect();
            let (rc, jc) = self.residual_and_jacobian(&cand);
            let cc = rc.norm_squared();
            if cc.is_finite() && cc < cost {
                x.copy_from_slice(&cand);
                r = rc;
                j = jc;
                cost = cc;
                lambda = (lambda * 0.2).max(1e-12);
            } else {
                lambda *= 10.0;
                if lambda > 1e12 {
                    return self.relative_residual(x) <= tol;
                }
            }
        }
        self.relative_residual(x) <= tol
    }
}

/// A 3-vector of polynomials with the cross and dot products needed by the
/// solver constructions.
pub type PVec3<C> = [Poly<C>; 3];

pub fn pcross<C: Field>(a: &PVec3<C>, b: &PVec3<C>) -> PVec3<C> {
    [
        &(&a[1] * &b[2]) - &(&a[2] * &b[1]),
        &(&a[2] * &b[0]) - &(&a[0] * &b[2]),
        &(&a[0] * &b[1]) - &(&a[1] * &b[0]),
    ]
}

pub fn pdot<C: Field>(a: &PVec3<C>, b: &PVec3<C>) -> Poly<C> {
    &(&(&a[0] * &b[0]) + &(&a[1] * &b[1])) + &(&a[2] * &b[2])
}

/// Dot product with a constant vector.
pub fn pdot_const<C: Field>(a: &[C; 3], b: &PVec3<C>) -> Poly<C> {
    &(&b[0].scale(a[0]) + &b[1].scale(a[1])) + &b[2].scale(a[2])
}
