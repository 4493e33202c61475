//! Elimination templates: file format, loading, numeric execution and an
//! offline builder working over a prime field.
//!
//! A template lists, for a polynomial system with a fixed monomial support,
//! which multiples `m * e_i` of the input equations form the rows of the
//! elimination matrix and how its columns are ordered: excessive monomials
//! first, then the monomials `x_a * b` that leave the standard basis `B`,
//! then `B` itself. Eliminating the first two groups expresses every
//! `x_a * b` in terms of `B`, which gives the action matrix of `x_a`.
//! Files hold only integers (exponents and indices); coefficients are
//! gathered from the input system at run time.

use std::collections::{BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::poly::{grevlex_cmp, mono_div, mono_mul, mono_var, monomials_up_to, Field, Fp, Mono, Poly, MAX_VARS};
use crate::solver::SolverId;

pub const FORMAT_VERSION: u32 = 1;
/// Environment variable overriding the template search directory.
pub const TEMPLATE_DIR_ENV: &str = "SEMIGEN_TEMPLATE_DIR";

/// Row of the elimination matrix: `multiplier * equations[equation]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateRow {
    pub equation: usize,
    pub multiplier: Vec<u8>,
}

/// Provenance of a template.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateMetadata {
    pub generator: String,
    pub prime: u64,
    pub expansion_degree: u32,
    pub instance_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverTemplate {
    pub format_version: u32,
    pub problem: SolverId,
    pub num_vars: usize,
    pub num_solutions: usize,
    pub action_variable: usize,
    /// Monomial support of each input equation.
    pub equations: Vec<Vec<Vec<u8>>>,
    pub rows: Vec<TemplateRow>,
    /// Column monomials: excessive, then reducible, then the basis.
    pub columns: Vec<Vec<u8>>,
    pub num_excessive: usize,
    pub num_reducible: usize,
    /// Columns (all excessive or reducible) that carry a pivot in the prime
    /// field reduction, in elimination order.
    pub pivot_columns: Vec<usize>,
    pub metadata: TemplateMetadata,
    /// Lowercase hex SHA-256 of the file with this field empty.
    #[serde(default)]
    pub content_hash: String,
}

fn to_mono(e: &[u8]) -> Result<Mono> {
    if e.len() > MAX_VARS {
        return Err(Error::Template(format!("exponent vector of length {} is too long", e.len())));
    }
    let mut m = [0u8; MAX_VARS];
    m[..e.len()].copy_from_slice(e);
    Ok(m)
}

impl SolverTemplate {
    pub fn compute_hash(&self) -> String {
        let mut t = self.clone();
        t.content_hash.clear();
        let bytes = serde_json::to_vec(&t).expect("template serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn with_hash(mut self) -> Self {
        self.content_hash = self.compute_hash();
        self
    }

    pub fn size(&self) -> (usize, usize) {
        (self.rows.len(), self.columns.len())
    }

    pub fn num_basis(&self) -> usize {
        self.columns.len() - self.num_excessive - self.num_reducible
    }

    /// Structural checks plus the content hash.
    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Template(format!(
                "unsupported template format version {} (expected {FORMAT_VERSION})",
                self.format_version
            )));
        }
        let h = self.compute_hash();
        if h != self.content_hash {
            return Err(Error::Template(format!(
                "content hash mismatch for {} template: file says {}, contents hash to {h}",
                self.problem, self.content_hash
            )));
        }
        let nb = self.columns.len().checked_sub(self.num_excessive + self.num_reducible);
        if nb != Some(self.num_solutions) || self.num_vars == 0 || self.num_vars > MAX_VARS {
            return Err(Error::Template("inconsistent column partition".into()));
        }
        if self.action_variable >= self.num_vars {
            return Err(Error::Template("action variable out of range".into()));
        }
        let width_ok = |e: &Vec<u8>| e.len() == self.num_vars;
        if !self.columns.iter().all(width_ok)
            || !self.equations.iter().flatten().all(width_ok)
            || !self.rows.iter().all(|r| width_ok(&r.multiplier) && r.equation < self.equations.len())
        {
            return Err(Error::Template("exponent vectors or row references are malformed".into()));
        }
        if self.pivot_columns.iter().any(|&c| c >= self.num_excessive + self.num_reducible) {
            return Err(Error::Template("pivot column out of range".into()));
        }
        let colset: HashMap<Mono, usize> = self.column_index()?;
        if colset.len() != self.columns.len() {
            return Err(Error::Template("duplicate column monomials".into()));
        }
        for r in &self.rows {
            let m = to_mono(&r.multiplier)?;
            for e in &self.equations[r.equation] {
                if !colset.contains_key(&mono_mul(&m, &to_mono(e)?)) {
                    return Err(Error::Template("row product falls outside the column set".into()));
                }
            }
        }
        self.action_plan()?;
        Ok(())
    }

    fn column_index(&self) -> Result<HashMap<Mono, usize>> {
        self.columns
            .iter()
            .enumerate()
            .map(|(i, e)| Ok((to_mono(e)?, i)))
            .collect()
    }

    /// Per basis monomial `b`, the column of `x_a * b`; also the positions of
    /// `1` and of each variable inside the basis.
    fn action_plan(&self) -> Result<(Vec<usize>, usize, Vec<usize>)> {
        let idx = self.column_index()?;
        let first_basis = self.num_excessive + self.num_reducible;
        let xa = mono_var(self.action_variable);
        let mut targets = Vec::with_capacity(self.num_solutions);
        for e in &self.columns[first_basis..] {
            let c = idx
                .get(&mono_mul(&to_mono(e)?, &xa))
                .copied()
                .filter(|&c| c >= self.num_excessive)
                .ok_or_else(|| Error::Template("action multiple of a basis monomial is not reducible".into()))?;
            targets.push(c);
        }
        let find = |m: Mono| {
            idx.get(&m)
                .copied()
                .filter(|&c| c >= first_basis)
                .map(|c| c - first_basis)
                .ok_or_else(|| Error::Template("basis must contain 1 and every variable".into()))
        };
        let one = find([0; MAX_VARS])?;
        let vars = (0..self.num_vars).map(|v| find(mono_var(v))).collect::<Result<Vec<_>>>()?;
        Ok((targets, one, vars))
    }

    /// Real solutions of `eqs`, whose supports must lie in the template's.
    /// Each solution is a vector of `num_vars` values.
    pub fn execute(&self, eqs: &[Poly<f64>]) -> Result<Vec<Vec<f64>>> {
        if eqs.len() != self.equations.len() {
            return Err(Error::Template(format!(
                "template expects {} equations, got {}",
                self.equations.len(),
                eqs.len()
            )));
        }
        // Coefficient vectors aligned with the template support.
        let mut coeffs = Vec::with_capacity(eqs.len());
        for (e, support) in eqs.iter().zip(&self.equations) {
            let monos: Vec<Mono> = support.iter().map(|m| to_mono(m)).collect::<Result<_>>()?;
            let scale = e.terms.values().fold(0.0f64, |a, c| a.max(c.abs()));
            for (m, c) in &e.terms {
                if !monos.contains(m) && c.abs() > 1e-12 * scale {
                    return Err(Error::Template("equation support exceeds the template".into()));
                }
            }
            let c: Vec<(Mono, f64)> = monos
                .iter()
                .map(|m| (*m, e.terms.get(m).copied().unwrap_or(0.0) / scale.max(f64::MIN_POSITIVE)))
                .collect();
            coeffs.push(c);
        }
        let idx = self.column_index()?;
        let (nr, nc) = self.size();
        let mut a = DMatrix::<f64>::zeros(nr, nc);
        for (i, r) in self.rows.iter().enumerate() {
            let m = to_mono(&r.multiplier)?;
            for (e, c) in &coeffs[r.equation] {
                a[(i, idx[&mono_mul(&m, e)])] += c;
            }
        }
        let pivot_rows = gauss_jordan_f64(&mut a, &self.pivot_columns)?;
        let first_basis = self.num_excessive + self.num_reducible;
        let nb = self.num_solutions;
        let (targets, one, vars) = self.action_plan()?;
        let row_of: HashMap<usize, usize> = self.pivot_columns.iter().copied().zip(pivot_rows).collect();
        // action * v = x_a v for the vector v of basis monomial values.
        let mut action = DMatrix::<f64>::zeros(nb, nb);
        for (j, &c) in targets.iter().enumerate() {
            if c >= first_basis {
                action[(j, c - first_basis)] = 1.0;
            } else {
                let r = *row_of
                    .get(&c)
                    .ok_or_else(|| Error::Template("reducible monomial has no pivot".into()))?;
                for k in 0..nb {
                    action[(j, k)] = -a[(r, first_basis + k)];
                }
            }
        }
        if action.iter().any(|v| !v.is_finite()) {
            return Ok(Vec::new());
        }
        let Some(eig) = crate::linalg::eigenvalues(&action) else {
            return Ok(Vec::new());
        };
        let mut out = Vec::new();
        for lam in eig.iter() {
            if lam.im.abs() > 1e-8 * (1.0 + lam.re.abs()) {
                continue;
            }
            let v = crate::linalg::real_eigenvector(&action, lam.re);
            if v[one].abs() <= 1e-12 * v.amax() {
                continue;
            }
            out.push(vars.iter().map(|&k| v[k] / v[one]).collect());
        }
        Ok(out)
    }
}

/// Gauss-Jordan elimination of the given pivot columns in order, choosing
/// the largest remaining entry of each column. Returns the pivot rows.
fn gauss_jordan_f64(a: &mut DMatrix<f64>, pivots: &[usize]) -> Result<Vec<usize>> {
    let (nr, nc) = a.shape();
    let mut used = vec![false; nr];
    let mut rows = Vec::with_capacity(pivots.len());
    for &c in pivots {
        let (mut best, mut val) = (usize::MAX, 0.0);
        for r in 0..nr {
            if !used[r] && a[(r, c)].abs() > val {
                best = r;
                val = a[(r, c)].abs();
            }
        }
        if best == usize::MAX || val == 0.0 {
            return Err(Error::Template("elimination template is numerically singular".into()));
        }
        used[best] = true;
        rows.push(best);
        let inv = 1.0 / a[(best, c)];
        for k in 0..nc {
            a[(best, k)] *= inv;
        }
        let pivot_row: Vec<f64> = a.row(best).iter().copied().collect();
        for r in 0..nr {
            if r == best {
                continue;
            }
            let f = a[(r, c)];
            if f != 0.0 {
                for k in 0..nc {
                    a[(r, k)] -= f * pivot_row[k];
                }
            }
        }
    }
    Ok(rows)
}

/// Loaded templates, keyed by problem.
#[derive(Debug, Clone, Default)]
pub struct TemplateSet {
    templates: HashMap<SolverId, SolverTemplate>,
}

impl TemplateSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, t: SolverTemplate) {
        self.templates.insert(t.problem, t);
    }

    pub fn get(&self, id: SolverId) -> Option<&SolverTemplate> {
        self.templates.get(&id)
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    /// Loads every `*.json` template in `dir`; a file that fails validation
    /// is an error.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let rd = std::fs::read_dir(dir).map_err(|e| Error::Template(format!("{}: {e}", dir.display())))?;
        let mut paths: Vec<PathBuf> = rd
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        let mut set = Self::new();
        for p in paths {
            set.insert(load_template(&p)?);
        }
        Ok(set)
    }

    /// Directory named by the environment override, else `default_dir`.
    pub fn search_dir(default_dir: Option<&Path>) -> Option<PathBuf> {
        std::env::var_os(TEMPLATE_DIR_ENV)
            .map(PathBuf::from)
            .or_else(|| default_dir.map(Path::to_path_buf))
    }
}

pub fn load_template(path: &Path) -> Result<SolverTemplate> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Template(format!("{}: {e}", path.display())))?;
    parse_template(&text).map_err(|e| match e {
        Error::Template(m) => Error::Template(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse_template(text: &str) -> Result<SolverTemplate> {
    let t: SolverTemplate = serde_json::from_str(text).map_err(|e| Error::Template(format!("malformed template: {e}")))?;
    t.validate()?;
    Ok(t)
}

pub fn write_template(t: &SolverTemplate, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(t).map_err(|e| Error::Template(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::Template(format!("{}: {e}", path.display())))
}

// ---------------------------------------------------------------------------
// Prime field tools used by the builder.

/// Reduced row echelon form in place, scanning columns in the given order.
/// Returns `(column, row)` pivot pairs.
pub fn fp_rref(a: &mut [Vec<Fp>], col_order: &[usize]) -> Vec<(usize, usize)> {
    let nr = a.len();
    let mut pivots = Vec::new();
    let mut next = 0;
    for &c in col_order {
        if next == nr {
            break;
        }
        let Some(r) = (next..nr).find(|&r| !a[r][c].is_zero()) else { continue };
        a.swap(next, r);
        let inv = a[next][c].inv();
        for v in a[next].iter_mut() {
            *v = *v * inv;
        }
        let pivot = a[next].clone();
        let nz: Vec<usize> = (0..pivot.len()).filter(|&k| !pivot[k].is_zero()).collect();
        for (r2, row) in a.iter_mut().enumerate() {
            if r2 != next && !row[c].is_zero() {
                let f = row[c];
                for &k in &nz {
                    row[k] = row[k] - f * pivot[k];
                }
            }
        }
        pivots.push((c, next));
        next += 1;
    }
    pivots
}

/// Right nullspace basis of a prime field matrix with `ncols` columns.
pub fn fp_nullspace(rows: &[Vec<Fp>], ncols: usize) -> Vec<Vec<Fp>> {
    let mut a = rows.to_vec();
    let order: Vec<usize> = (0..ncols).collect();
    let pivots = fp_rref(&mut a, &order);
    let pivot_cols: BTreeSet<usize> = pivots.iter().map(|p| p.0).collect();
    (0..ncols)
        .filter(|c| !pivot_cols.contains(c))
        .map(|free| {
            let mut v = vec![Fp(0); ncols];
            v[free] = Fp(1);
            for &(c, r) in &pivots {
                v[c] = -a[r][free];
            }
            v
        })
        .collect()
}

/// Polynomial with terms sorted by decreasing grevlex order.
#[derive(Debug, Clone, PartialEq)]
struct SortedPoly(Vec<(Mono, Fp)>);

impl SortedPoly {
    fn from_poly(p: &Poly<Fp>) -> Self {
        let mut t: Vec<(Mono, Fp)> = p.terms.iter().map(|(m, c)| (*m, *c)).collect();
        t.sort_by(|a, b| grevlex_cmp(&b.0, &a.0));
        SortedPoly(t)
    }

    fn lm(&self) -> Option<Mono> {
        self.0.first().map(|t| t.0)
    }

    fn monic(mut self) -> Self {
        if let Some(&(_, c)) = self.0.first() {
            let inv = c.inv();
            for t in self.0.iter_mut() {
                t.1 = t.1 * inv;
            }
        }
        self
    }

    /// `self - c * m * g`.
    fn sub_mul(&self, c: Fp, m: &Mono, g: &SortedPoly) -> SortedPoly {
        let mut out = Vec::with_capacity(self.0.len() + g.0.len());
        let (mut i, mut j) = (0, 0);
        let gs: Vec<(Mono, Fp)> = g.0.iter().map(|(k, v)| (mono_mul(k, m), -(*v * c))).collect();
        while i < self.0.len() || j < gs.len() {
            let ord = match (self.0.get(i), gs.get(j)) {
                (Some(a), Some(b)) => grevlex_cmp(&a.0, &b.0),
                (Some(_), None) => std::cmp::Ordering::Greater,
                _ => std::cmp::Ordering::Less,
            };
            match ord {
                std::cmp::Ordering::Greater => {
                    out.push(self.0[i]);
                    i += 1;
                }
                std::cmp::Ordering::Less => {
                    out.push(gs[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    let s = self.0[i].1 + gs[j].1;
                    if !s.is_zero() {
                        out.push((self.0[i].0, s));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        SortedPoly(out)
    }

    /// Full reduction modulo monic `basis`.
    fn reduce(&self, basis: &[SortedPoly]) -> SortedPoly {
        let mut p = self.clone();
        let mut done: Vec<(Mono, Fp)> = Vec::new();
        while let Some(&(m, c)) = p.0.first() {
            let hit = basis.iter().find_map(|g| mono_div(&m, &g.lm().expect("nonzero")).map(|q| (g, q)));
            match hit {
                Some((g, q)) => p = p.sub_mul(c, &q, g),
                None => {
                    done.push((m, c));
                    p.0.remove(0);
                }
            }
        }
        SortedPoly(done)
    }
}

fn mono_lcm(a: &Mono, b: &Mono) -> Mono {
    std::array::from_fn(|i| a[i].max(b[i]))
}

/// Reduced Groebner basis (grevlex) of the ideal spanned by `eqs`.
pub fn groebner_basis(eqs: &[Poly<Fp>]) -> Vec<Poly<Fp>> {
    let nvars = eqs.first().map_or(0, |e| e.nvars);
    let mut g: Vec<SortedPoly> = Vec::new();
    for e in eqs {
        let r = SortedPoly::from_poly(e).reduce(&g);
        if r.lm().is_some() {
            g.push(r.monic());
        }
    }
    let mut pairs: Vec<(usize, usize)> = (0..g.len()).flat_map(|j| (0..j).map(move |i| (i, j))).collect();
    while !pairs.is_empty() {
        // Normal strategy: smallest lcm first.
        let (k, _) = pairs
            .iter()
            .enumerate()
            .min_by(|a, b| {
                let la = mono_lcm(&g[a.1 .0].lm().unwrap(), &g[a.1 .1].lm().unwrap());
                let lb = mono_lcm(&g[b.1 .0].lm().unwrap(), &g[b.1 .1].lm().unwrap());
                grevlex_cmp(&la, &lb)
            })
            .unwrap();
        let (i, j) = pairs.swap_remove(k);
        let (li, lj) = (g[i].lm().unwrap(), g[j].lm().unwrap());
        let l = mono_lcm(&li, &lj);
        if mono_mul(&li, &lj) == l {
            continue;
        }
        let s = SortedPoly(Vec::new())
            .sub_mul(-Fp(1), &mono_div(&l, &li).unwrap(), &g[i])
            .sub_mul(Fp(1), &mono_div(&l, &lj).unwrap(), &g[j]);
        let r = s.reduce(&g);
        if r.lm().is_some() {
            let n = g.len();
            g.push(r.monic());
            pairs.extend((0..n).map(|i| (i, n)));
        }
    }
    // Minimal, then reduced.
    let lms: Vec<Mono> = g.iter().map(|p| p.lm().unwrap()).collect();
    let mut keep: Vec<SortedPoly> = Vec::new();
    for (i, p) in g.iter().enumerate() {
        let redundant = lms
            .iter()
            .enumerate()
            .any(|(j, m)| j != i && mono_div(&lms[i], m).is_some() && (lms[i] != *m || j < i));
        if !redundant {
            keep.push(p.clone());
        }
    }
    let mut reduced = Vec::with_capacity(keep.len());
    for i in 0..keep.len() {
        let others: Vec<SortedPoly> = keep.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, p)| p.clone()).collect();
        let lead = SortedPoly(vec![keep[i].0[0]]);
        let tail = SortedPoly(keep[i].0[1..].to_vec()).reduce(&others);
        let mut t = lead.0;
        t.extend(tail.0);
        reduced.push(SortedPoly(t));
    }
    reduced
        .into_iter()
        .map(|p| {
            let mut out = Poly::zero(nvars);
            for (m, c) in p.0 {
                out.add_term(m, c);
            }
            out
        })
        .collect()
}

/// Standard monomials of a zero-dimensional ideal with the given Groebner
/// basis, in increasing grevlex order; `None` for positive-dimensional
/// ideals.
pub fn standard_monomials(gb: &[Poly<Fp>], nvars: usize) -> Option<Vec<Mono>> {
    let lms: Vec<Mono> = gb.iter().filter_map(|p| p.leading().map(|t| t.0)).collect();
    let mut bound = 0u32;
    for v in 0..nvars {
        let pure = lms
            .iter()
            .filter(|m| (0..nvars).all(|k| k == v || m[k] == 0) && m[v] > 0)
            .map(|m| m[v] as u32)
            .min()?;
        bound += pure;
    }
    let mut out: Vec<Mono> = monomials_up_to(nvars, bound)
        .into_iter()
        .filter(|m| lms.iter().all(|l| mono_div(m, l).is_none()))
        .collect();
    out.sort_by(grevlex_cmp);
    Some(out)
}

/// Builds an elimination template for the action of `action_variable` from
/// one prime field instance of the system, growing the Macaulay expansion
/// degree until every reducible monomial is expressed in the basis.
pub fn build_template(
    problem: SolverId,
    eqs: &[Poly<Fp>],
    action_variable: usize,
    max_degree: u32,
    instance_seed: u64,
) -> Result<SolverTemplate> {
    let nvars = eqs.first().map_or(0, |e| e.nvars);
    let gb = groebner_basis(eqs);
    let basis = standard_monomials(&gb, nvars)
        .ok_or_else(|| Error::Template(format!("{problem} system is not zero-dimensional")))?;
    let basis_set: BTreeSet<Mono> = basis.iter().copied().collect();
    if !basis_set.contains(&[0; MAX_VARS]) || (0..nvars).any(|v| !basis_set.contains(&mono_var(v))) {
        return Err(Error::Template("standard basis lacks 1 or a variable".into()));
    }
    let xa = mono_var(action_variable);
    let reducible: BTreeSet<Mono> = basis
        .iter()
        .map(|b| mono_mul(b, &xa))
        .filter(|m| !basis_set.contains(m))
        .collect();
    let min_deg = reducible.iter().map(crate::poly::mono_degree).max().unwrap_or(0);
    for degree in min_deg..=max_degree {
        let mut rows: Vec<TemplateRow> = Vec::new();
        let mut row_polys: Vec<Poly<Fp>> = Vec::new();
        for (i, e) in eqs.iter().enumerate() {
            let d = e.degree();
            if d > degree {
                continue;
            }
            for m in monomials_up_to(nvars, degree - d) {
                rows.push(TemplateRow {
                    equation: i,
                    multiplier: m[..nvars].to_vec(),
                });
                row_polys.push(e.mul_mono(&m, Fp(1)));
            }
        }
        let mut all: BTreeSet<Mono> = BTreeSet::new();
        for p in &row_polys {
            all.extend(p.terms.keys().copied());
        }
        if !basis_set.is_subset(&all) || !reducible.is_subset(&all) {
            continue;
        }
        let mut excessive: Vec<Mono> = all
            .iter()
            .filter(|m| !basis_set.contains(*m) && !reducible.contains(*m))
            .copied()
            .collect();
        excessive.sort_by(|a, b| grevlex_cmp(b, a));
        let mut red: Vec<Mono> = reducible.iter().copied().collect();
        red.sort_by(|a, b| grevlex_cmp(b, a));
        let columns: Vec<Mono> = excessive.iter().chain(&red).chain(&basis).copied().collect();
        let col_idx: HashMap<Mono, usize> = columns.iter().enumerate().map(|(i, m)| (*m, i)).collect();
        let mut mat: Vec<Vec<Fp>> = row_polys
            .iter()
            .map(|p| {
                let mut r = vec![Fp(0); columns.len()];
                for (m, c) in &p.terms {
                    r[col_idx[m]] = *c;
                }
                r
            })
            .collect();
        let ne = excessive.len();
        let nred = red.len();
        let order: Vec<usize> = (0..ne + nred).collect();
        let pivots = fp_rref(&mut mat, &order);
        let pivot_of: HashMap<usize, usize> = pivots.iter().copied().collect();
        let ok = (ne..ne + nred).all(|c| {
            pivot_of
                .get(&c)
                .is_some_and(|&r| (0..ne + nred).all(|k| k == c || mat[r][k].is_zero()))
        });
        if !ok {
            continue;
        }
        let exps = |m: &Mono| m[..nvars].to_vec();
        let t = SolverTemplate {
            format_version: FORMAT_VERSION,
            problem,
            num_vars: nvars,
            num_solutions: basis.len(),
            action_variable,
            equations: eqs
                .iter()
                .map(|e| {
                    let mut ms: Vec<Mono> = e.terms.keys().copied().collect();
                    ms.sort_by(|a, b| grevlex_cmp(b, a));
                    ms.iter().map(exps).collect()
                })
                .collect(),
            rows,
            columns: columns.iter().map(exps).collect(),
            num_excessive: ne,
            num_reducible: nred,
            pivot_columns: pivots.iter().map(|p| p.0).collect(),
            metadata: TemplateMetadata {
                generator: "macaulay-expansion".into(),
                prime: Fp::P,
                expansion_degree: degree,
                instance_seed,
            },
            content_hash: String::new(),
        }
        .with_hash();
        return Ok(t);
    }
    Err(Error::Template(format!(
        "no elimination template found up to degree {max_degree}"
    )))
}

fn fp_rand(rng: &mut ChaCha8Rng) -> Fp {
    Fp(rng.gen_range(1..Fp::P))
}

/// Random combinations of three nullspace vectors, reshaped to 3x3 matrices,
/// so that no entry is a structural zero of the echelon form.
fn mixed_basis(ns: &[Vec<Fp>], rng: &mut ChaCha8Rng) -> [[[Fp; 3]; 3]; 3] {
    let mix: [[Fp; 3]; 3] = std::array::from_fn(|_| std::array::from_fn(|_| fp_rand(rng)));
    std::array::from_fn(|k| {
        std::array::from_fn(|i| {
            std::array::from_fn(|j| (0..3).fold(Fp(0), |acc, l| acc + mix[k][l] * ns[l][3 * i + j]))
        })
    })
}

/// A random prime field instance of a solver's reduced system, with the same
/// structural zeros as the canonical real instances.
pub fn random_fp_system(problem: SolverId, seed: u64) -> Result<Vec<Poly<Fp>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match problem {
        SolverId::H13f => {
            let c = fp_rand(&mut rng);
            let mut rows = Vec::new();
            for _ in 0..3 {
                let x = [fp_rand(&mut rng), fp_rand(&mut rng), c];
                let p = [fp_rand(&mut rng), fp_rand(&mut rng), Fp(1)];
                let s = [
                    [Fp(0), -p[2], p[1]],
                    [p[2], Fp(0), -p[0]],
                    [-p[1], p[0], Fp(0)],
                ];
                for k in 0..3 {
                    let mut row = vec![Fp(0); 9];
                    for r in 0..3 {
                        for col in 0..3 {
                            row[3 * r + col] = s[k][r] * x[col];
                        }
                    }
                    rows.push(row);
                }
            }
            let ns = fp_nullspace(&rows, 9);
            if ns.len() != 3 {
                return Err(Error::Template("prime field instance is degenerate".into()));
            }
            let basis = mixed_basis(&ns, &mut rng);
            let q = [fp_rand(&mut rng), Fp(0), Fp(1)];
            let p = [fp_rand(&mut rng), fp_rand(&mut rng), Fp(1)];
            Ok(crate::h13f::h13f_equations(&basis, &q, &p))
        }
        SolverId::H51f5 => {
            let rows: Vec<Vec<Fp>> = (0..6)
                .map(|_| {
                    let p = [fp_rand(&mut rng), fp_rand(&mut rng), Fp(1)];
                    let q = [fp_rand(&mut rng), fp_rand(&mut rng), fp_rand(&mut rng)];
                    (0..9).map(|k| p[k / 3] * q[k % 3]).collect()
                })
                .collect();
            let ns = fp_nullspace(&rows, 9);
            if ns.len() != 3 {
                return Err(Error::Template("prime field instance is degenerate".into()));
            }
            let basis = mixed_basis(&ns, &mut rng);
            Ok(crate::h51f5::focal_equations(&basis))
        }
        SolverId::H32f => {
            let x4 = fp_rand(&mut rng);
            let y4 = fp_rand(&mut rng);
            let data: Vec<([Fp; 3], [Fp; 3], [Fp; 3])> = (0..3)
                .map(|_| {
                    (
                        [fp_rand(&mut rng), fp_rand(&mut rng), Fp(1)],
                        std::array::from_fn(|_| fp_rand(&mut rng)),
                        std::array::from_fn(|_| fp_rand(&mut rng)),
                    )
                })
                .collect();
            let (cleared, q33) = crate::h32f::h32f_cleared_equations(x4, y4, &data);
            cleared
                .iter()
                .map(|e| {
                    e.divide_exact(&q33)
                        .ok_or_else(|| Error::Template("cleared equation is not divisible".into()))
                })
                .collect()
        }
        SolverId::DltAp => Err(Error::Template("the linear baseline has no template".into())),
    }
}

/// Number of solutions of a random prime field instance, from the standard
/// monomials of its Groebner basis; `None` for positive-dimensional ideals.
pub fn fp_solution_count(eqs: &[Poly<Fp>]) -> Option<usize> {
    let nvars = eqs.first().map_or(0, |e| e.nvars);
    standard_monomials(&groebner_basis(eqs), nvars).map(|b| b.len())
}

/// Default action variable of each problem.
pub fn default_action_variable(problem: SolverId) -> usize {
    match problem {
        SolverId::H13f => 3,
        SolverId::H51f5 => 2,
        _ => 0,
    }
}
