//! Root systems, fundamental systems and the finite reflection groups they generate.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Entrywise tolerance for matrix and vector identification.
pub const MATRIX_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ORDER: usize = 10_080;

/// Quantization used to bucket matrices before the tolerance comparison.
const KEY_SCALE: f64 = 1e6;

/// Reflection of `x` in the hyperplane orthogonal to `alpha`.
pub fn reflect(alpha: &DVector<f64>, x: &DVector<f64>) -> Result<DVector<f64>> {
    if alpha.len() != x.len() {
        return Err(Error::domain(format!(
            "dimension mismatch: root has {} entries, point has {}",
            alpha.len(),
            x.len()
        )));
    }
    let norm2 = alpha.norm_squared();
    if norm2 == 0.0 || !norm2.is_finite() {
        return Err(Error::domain("cannot reflect in a zero root"));
    }
    Ok(x - alpha * (2.0 * x.dot(alpha) / norm2))
}

/// Matrix of the reflection `x ↦ x - 2<x,α>/<α,α> α`.
pub fn reflection_matrix(alpha: &DVector<f64>) -> DMatrix<f64> {
    let d = alpha.len();
    DMatrix::identity(d, d) - alpha * alpha.transpose() * (2.0 / alpha.norm_squared())
}

/// A set of `m <= d` linearly independent simple roots in `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalSystem {
    dim: usize,
    roots: Vec<DVector<f64>>,
    name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FundamentalSystemJson {
    pub dim: usize,
    pub simple_roots: Vec<Vec<f64>>,
}

impl FundamentalSystem {
    pub fn new(dim: usize, roots: Vec<DVector<f64>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::domain("dimension must be positive"));
        }
        if roots.is_empty() {
            return Err(Error::domain("a fundamental system needs at least one root"));
        }
        if roots.len() > dim {
            return Err(Error::domain(format!(
                "{} roots cannot be independent in R^{dim}",
                roots.len()
            )));
        }
        for (i, r) in roots.iter().enumerate() {
            if r.len() != dim {
                return Err(Error::domain(format!("root {i} has {} entries, expected {dim}", r.len())));
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::domain(format!("root {i} has non-finite entries")));
            }
            if r.norm_squared() == 0.0 {
                return Err(Error::domain(format!("root {i} is zero")));
            }
        }
        let fs = FundamentalSystem { dim, roots, name: None };
        let matrix = fs.root_matrix();
        if linalg::rank(&matrix) < fs.rank() {
            return Err(Error::LinearAlgebra {
                message: "simple roots are linearly dependent".into(),
                singular_values: linalg::singular_values(&matrix),
            });
        }
        Ok(fs)
    }

    fn named(mut self, name: String) -> Self {
        self.name = Some(name);
        self
    }

    /// `A_n`: roots `e_i - e_{i+1}` in `R^{n+1}`.
    pub fn type_a(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("A_n needs n >= 1"));
        }
        let roots = (0..n)
            .map(|i| {
                let mut v = DVector::zeros(n + 1);
                v[i] = 1.0;
                v[i + 1] = -1.0;
                v
            })
            .collect();
        Ok(Self::new(n + 1, roots)?.named(format!("A{n}")))
    }

    /// Dihedral `I_2(m)`: two roots in the plane at angle `π - π/m`.
    pub fn dihedral(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::domain("I2(m) needs m >= 2"));
        }
        let theta = std::f64::consts::PI - std::f64::consts::PI / m as f64;
        let roots = vec![
            DVector::from_vec(vec![1.0, 0.0]),
            DVector::from_vec(vec![theta.cos(), theta.sin()]),
        ];
        Ok(Self::new(2, roots)?.named(format!("I2({m})")))
    }

    /// The coordinate vectors `e_1, ..., e_m` in `R^m`.
    pub fn orthogonal(m: usize) -> Result<Self> {
        let roots = (0..m)
            .map(|i| {
                let mut v = DVector::zeros(m);
                v[i] = 1.0;
                v
            })
            .collect();
        Ok(Self::new(m, roots)?.named(format!("orthogonal({m})")))
    }

    /// Parses `"A<n>"`, `"I2(<m>)"` or `"orthogonal(<m>)"`.
    pub fn from_name(name: &str) -> Result<Self> {
        let name = name.trim();
        let bad = || Error::Config(format!("unknown root system name {name:?}"));
        let paren = |s: &str| -> Result<usize> {
            s.strip_prefix('(')
                .and_then(|s| s.strip_suffix(')'))
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(bad)
        };
        if let Some(rest) = name.strip_prefix("I2") {
            Self::dihedral(paren(rest)?)
        } else if let Some(rest) = name.strip_prefix("orthogonal") {
            Self::orthogonal(paren(rest)?)
        } else if let Some(rest) = name.strip_prefix('A') {
            Self::type_a(rest.parse().map_err(|_| bad())?)
        } else {
            Err(bad())
        }
    }

    pub fn from_json(json: &FundamentalSystemJson) -> Result<Self> {
        let roots = json
            .simple_roots
            .iter()
            .map(|r| DVector::from_vec(r.clone()))
            .collect();
        Self::new(json.dim, roots)
    }

    pub fn to_json(&self) -> FundamentalSystemJson {
        FundamentalSystemJson {
            dim: self.dim,
            simple_roots: self.roots.iter().map(|r| r.iter().copied().collect()).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of simple roots `m`.
    pub fn rank(&self) -> usize {
        self.roots.len()
    }

    pub fn roots(&self) -> &[DVector<f64>] {
        &self.roots
    }

    pub fn name(&self) -> String {
        self.name.clone().unwrap_or_else(|| "custom".into())
    }

    /// The `m x d` matrix whose rows are the simple roots.
    pub fn root_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.roots.len(), self.dim, |i, j| self.roots[i][j])
    }

    /// Whether `x` lies in the open chamber `{<x, α_i> > 0 for all i}`.
    pub fn chamber_contains(&self, x: &DVector<f64>) -> bool {
        x.len() == self.dim && self.roots.iter().all(|a| x.dot(a) > 0.0)
    }
}

impl fmt::Display for FundamentalSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} in R^{}", self.name(), self.dim)
    }
}

pub fn chamber_contains(fs: &FundamentalSystem, x: &DVector<f64>) -> bool {
    fs.chamber_contains(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupElement {
    pub matrix: DMatrix<f64>,
    /// `ε(w) = det w`.
    pub sign: f64,
    /// Shortest word in the simple reflections: `matrix = s_{word[0]} ... s_{word[k-1]}`.
    pub word: Vec<usize>,
    /// Representation matrix `T_w` once bound to a barrier.
    pub rep_matrix: Option<DMatrix<f64>>,
}

impl GroupElement {
    pub fn is_identity(&self) -> bool {
        self.word.is_empty()
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.matrix * x
    }
}

/// A finite reflection group, stored as an explicit list of matrices.
#[derive(Debug, Clone)]
pub struct ReflectionGroup {
    dim: usize,
    elements: Vec<GroupElement>,
    index: HashMap<Vec<i64>, Vec<usize>>,
}

fn matrix_key(m: &DMatrix<f64>) -> Vec<i64> {
    m.iter().map(|v| (v * KEY_SCALE).round() as i64).collect()
}

impl ReflectionGroup {
    fn insert(&mut self, element: GroupElement) -> usize {
        let idx = self.elements.len();
        self.index.entry(matrix_key(&element.matrix)).or_default().push(idx);
        self.elements.push(element);
        idx
    }

    /// Index of the element whose matrix matches `m` to `MATRIX_TOL`.
    pub fn find(&self, m: &DMatrix<f64>) -> Option<usize> {
        if m.shape() != (self.dim, self.dim) {
            return None;
        }
        self.index.get(&matrix_key(m)).and_then(|bucket| {
            bucket
                .iter()
                .copied()
                .find(|&i| linalg::max_abs_diff(&self.elements[i].matrix, m) <= MATRIX_TOL)
        })
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn elements(&self) -> &[GroupElement] {
        &self.elements
    }

    pub fn element(&self, i: usize) -> &GroupElement {
        &self.elements[i]
    }

    pub fn identity(&self) -> &GroupElement {
        &self.elements[0]
    }

    /// Index of `w_i · w_j`.
    pub fn product(&self, i: usize, j: usize) -> Option<usize> {
        self.find(&(&self.elements[i].matrix * &self.elements[j].matrix))
    }

    /// Index of `w_i^{-1}` (the transpose, as elements are orthogonal).
    pub fn inverse(&self, i: usize) -> Option<usize> {
        self.find(&self.elements[i].matrix.transpose())
    }

    /// Copy with `rep_matrix` filled by `rep` for every element.
    pub fn with_rep_matrices<F>(&self, mut rep: F) -> Result<Self>
    where
        F: FnMut(&GroupElement) -> Result<DMatrix<f64>>,
    {
        let mut out = self.clone();
        for e in out.elements.iter_mut() {
            e.rep_matrix = Some(rep(e)?);
        }
        Ok(out)
    }
}

/// Breadth-first closure of the simple reflections under multiplication.
pub fn generate_group(fs: &FundamentalSystem, max_order: usize) -> Result<ReflectionGroup> {
    let d = fs.dim();
    let generators: Vec<DMatrix<f64>> = fs.roots().iter().map(reflection_matrix).collect();
    let mut group = ReflectionGroup {
        dim: d,
        elements: Vec::new(),
        index: HashMap::new(),
    };
    group.insert(GroupElement {
        matrix: DMatrix::identity(d, d),
        sign: 1.0,
        word: Vec::new(),
        rep_matrix: None,
    });
    let mut queue = VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        for (k, s) in generators.iter().enumerate() {
            let m = s * &group.elements[i].matrix;
            if group.find(&m).is_some() {
                continue;
            }
            if group.order() >= max_order {
                return Err(Error::NotFinite { cap: max_order });
            }
            let det = m.determinant();
            let mut word = Vec::with_capacity(group.elements[i].word.len() + 1);
            word.push(k);
            word.extend_from_slice(&group.elements[i].word);
            let idx = group.insert(GroupElement {
                matrix: m,
                sign: det.signum(),
                word,
                rep_matrix: None,
            });
            queue.push_back(idx);
        }
    }
    Ok(group)
}

/// The full root system `{w(α) : w ∈ W, α ∈ Σ}`.
#[derive(Debug, Clone)]
pub struct RootSystem {
    pub fundamental: FundamentalSystem,
    pub all_roots: Vec<DVector<f64>>,
}

fn vectors_close(a: &DVector<f64>, b: &DVector<f64>) -> bool {
    a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() <= MATRIX_TOL)
}

pub fn full_root_system(fs: &FundamentalSystem, group: &ReflectionGroup) -> RootSystem {
    let mut all: Vec<DVector<f64>> = Vec::new();
    for w in group.elements() {
        for a in fs.roots() {
            let r = w.apply(a);
            if !all.iter().any(|b| vectors_close(b, &r)) {
                all.push(r);
            }
        }
    }
    RootSystem {
        fundamental: fs.clone(),
        all_roots: all,
    }
}

impl RootSystem {
    pub fn contains(&self, v: &DVector<f64>) -> bool {
        self.all_roots.iter().any(|r| vectors_close(r, v))
    }

    /// (R1): the only multiples of a root in the system are `±α`.
    pub fn satisfies_r1(&self) -> bool {
        self.all_roots.iter().all(|a| {
            self.all_roots.iter().all(|b| {
                // b parallel to a iff |<a,b>| = |a||b|
                let parallel = (a.dot(b).abs() - a.norm() * b.norm()).abs() <= MATRIX_TOL * a.norm() * b.norm();
                !parallel || vectors_close(a, b) || vectors_close(&-a, b)
            })
        })
    }

    /// (R2): `s_α Φ = Φ` for every root `α`.
    pub fn satisfies_r2(&self) -> bool {
        self.all_roots.iter().all(|a| {
            self.all_roots
                .iter()
                .all(|b| reflect(a, b).map(|r| self.contains(&r)).unwrap_or(false))
        })
    }

    pub fn closed_under_negation(&self) -> bool {
        self.all_roots.iter().all(|a| self.contains(&-a))
    }

    pub fn is_valid(&self) -> bool {
        self.satisfies_r1() && self.satisfies_r2() && self.closed_under_negation()
    }
}

/// Maps `x` into the chamber: returns the unique `w` with `w(x) ∈ C_Σ` and the image.
pub fn canonicalize_to_chamber(
    fs: &FundamentalSystem,
    group: &ReflectionGroup,
    x: &DVector<f64>,
) -> Result<(GroupElement, DVector<f64>)> {
    if x.len() != fs.dim() {
        return Err(Error::domain(format!("point has {} entries, expected {}", x.len(), fs.dim())));
    }
    let scale = x.norm();
    let mut y = x.clone();
    let mut w = DMatrix::identity(fs.dim(), fs.dim());
    // Each step strictly shortens w, so the descent stops after at most |W| steps.
    for _ in 0..=group.order() {
        let mut moved = false;
        for a in fs.roots() {
            let ip = y.dot(a);
            if ip.abs() <= 1e-12 * scale * a.norm() {
                return Err(Error::BoundaryPoint(format!(
                    "point {:?} lies on a reflecting hyperplane",
                    x.as_slice()
                )));
            }
            if ip < 0.0 {
                let s = reflection_matrix(a);
                y = &s * &y;
                w = s * w;
                moved = true;
                break;
            }
        }
        if !moved {
            let idx = group.find(&w).ok_or_else(|| Error::Geometry {
                message: "descent produced a matrix outside the group".into(),
                residual: f64::NAN,
            })?;
            return Ok((group.element(idx).clone(), y));
        }
    }
    Err(Error::Geometry {
        message: "chamber descent did not terminate".into(),
        residual: f64::NAN,
    })
}
