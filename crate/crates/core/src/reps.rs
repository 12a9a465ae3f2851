//! Representations of free and genus-2 surface groups into SL(d, R):
//! Schottky and octagon constructions, symmetric powers, analytic paths.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use thiserror::Error;

use crate::matnum::{BoundaryPoint, MatError, Matrix};
use crate::words::{Generator, GroupKind, GroupSpec, PrefixGuard, Word, WordError};

/// Entrywise tolerance for the surface relator.
pub const RELATOR_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RepError {
    #[error("relator defect {defect:e} exceeds tolerance")]
    RelatorViolation { defect: f64 },
    #[error("ping-pong configuration fails: {0}")]
    PingPongFailure(String),
    #[error("contragredient symmetry violated (residual {residual:e})")]
    SymmetryViolation { residual: f64 },
    #[error("invalid octagon: {0}")]
    InvalidOctagon(String),
    #[error("expected {expected} generator images, got {got}")]
    WrongGeneratorCount { expected: usize, got: usize },
    #[error("generator images must all be {expected}x{expected}")]
    DimensionMismatch { expected: usize },
    #[error("generator image {0} is singular")]
    Singular(usize),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Mat(#[from] MatError),
    #[error(transparent)]
    Word(#[from] WordError),
}

/// Homomorphism from a group to SL(d, R) (or to matrices of determinant -1
/// for even `d`, with the sign recorded).
#[derive(Clone, Debug)]
pub struct Representation {
    spec: GroupSpec,
    label: String,
    dim: usize,
    /// Indexed by letter: generator, inverse, generator, inverse, ...
    letters: Vec<Matrix>,
    det_signs: Vec<i8>,
}

fn normalize_det(m: &Matrix) -> Option<(Matrix, i8)> {
    let d = m.dim();
    let det = m.det();
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    if (det - 1.0).abs() <= 1e-12 {
        return Some((m.clone(), 1));
    }
    let root = det.abs().powf(1.0 / d as f64);
    if det > 0.0 {
        Some((m.scale(1.0 / root), 1))
    } else if d % 2 == 1 {
        Some((m.scale(-1.0 / root), 1))
    } else if (det + 1.0).abs() <= 1e-12 {
        Some((m.clone(), -1))
    } else {
        Some((m.scale(1.0 / root), -1))
    }
}

fn inverse_of(m: &Matrix) -> Result<Matrix, MatError> {
    if m.dim() == 2 {
        let det = m.det();
        if det == 0.0 {
            return Err(MatError::Singular);
        }
        let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
        // exact adjugate when det = 1
        let s = if det == 1.0 { 1.0 } else { 1.0 / det };
        return Ok(Matrix::from_rows(&[&[d * s, -b * s], &[-c * s, a * s]]));
    }
    m.inverse()
}

impl Representation {
    /// Builds a representation from one image per generator, rescaling each
    /// to unit determinant (up to a recorded sign for even dimension).
    pub fn new(spec: GroupSpec, images: Vec<Matrix>, label: impl Into<String>) -> Result<Self, RepError> {
        if images.len() != spec.rank() {
            return Err(RepError::WrongGeneratorCount {
                expected: spec.rank(),
                got: images.len(),
            });
        }
        let dim = images[0].dim();
        let mut letters = Vec::with_capacity(2 * images.len());
        let mut det_signs = Vec::with_capacity(images.len());
        for (i, m) in images.iter().enumerate() {
            if m.dim() != dim {
                return Err(RepError::DimensionMismatch { expected: dim });
            }
            if !m.is_finite() {
                return Err(MatError::NonFinite.into());
            }
            let (m, sign) = normalize_det(m).ok_or(RepError::Singular(i))?;
            let inv = inverse_of(&m).map_err(|_| RepError::Singular(i))?;
            letters.push(m);
            letters.push(inv);
            det_signs.push(sign);
        }
        let rep = Representation {
            spec,
            label: label.into(),
            dim,
            letters,
            det_signs,
        };
        if rep.spec.is_surface() {
            let defect = rep.relator_defect();
            if !(defect <= RELATOR_TOL) {
                return Err(RepError::RelatorViolation { defect });
            }
        }
        Ok(rep)
    }

    pub fn spec(&self) -> &GroupSpec {
        &self.spec
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Image of a single letter.
    pub fn image(&self, g: Generator) -> &Matrix {
        &self.letters[g.index()]
    }

    /// Images of the generators `a, b, ...`.
    pub fn generators(&self) -> Vec<Matrix> {
        self.letters.iter().step_by(2).cloned().collect()
    }

    pub fn det_signs(&self) -> &[i8] {
        &self.det_signs
    }

    pub fn evaluate_letters(&self, w: &[Generator]) -> Matrix {
        let mut m = Matrix::identity(self.dim);
        for &g in w {
            m = &m * self.image(g);
        }
        m
    }

    pub fn evaluate(&self, w: &Word) -> Matrix {
        self.evaluate_letters(w.letters())
    }

    /// Distance of the relator image from `+I` or `-I`, entrywise.
    pub fn relator_defect(&self) -> f64 {
        let Some(r) = self.spec.relator() else { return 0.0 };
        let m = self.evaluate(&r);
        let id = Matrix::identity(self.dim);
        m.max_diff(&id).min(m.max_diff(&id.scale(-1.0)))
    }

    /// `u rho u^{-1}`.
    pub fn conjugate(&self, u: &Matrix) -> Result<Representation, RepError> {
        let ui = u.inverse()?;
        let images = self.generators().iter().map(|g| &(u * g) * &ui).collect();
        Representation::new(self.spec.clone(), images, format!("{}^u", self.label))
    }

    /// Conjugate of an SL(2) representation moving the base point `i` to
    /// the minimizer of `sum_g d(p, g p)` over the generators. Lengths
    /// are unchanged; entries end up of the order of the spectral radii,
    /// which keeps additive perturbations and displacement pruning sane.
    pub fn balanced(&self) -> Result<Representation, RepError> {
        assert_eq!(self.dim, 2, "balancing applies to SL(2) representations");
        let gens = self.generators();
        let to_point = |x: f64, s: f64| {
            let h = (0.5 * s).exp();
            Matrix::from_rows(&[&[h, x / h], &[0.0, 1.0 / h]])
        };
        let cost = |x: f64, s: f64| -> f64 {
            let m = to_point(x, s);
            let mi = m.inverse().expect("unit determinant");
            gens.iter().map(|g| cosh_displacement(&(&(&mi * g) * &m)).max(1.0).acosh()).sum()
        };
        let (mut x, mut s, mut step) = (0.0, 0.0, 1.0);
        let mut best = cost(x, s);
        while step > 1e-10 {
            let mut moved = false;
            for (dx, ds) in [(step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)] {
                let c = cost(x + dx, s + ds);
                if c < best {
                    (x, s, best, moved) = (x + dx, s + ds, c, true);
                    break;
                }
            }
            if !moved {
                step *= 0.5;
            }
        }
        let rep = self.conjugate(&to_point(x, s).inverse()?)?;
        Ok(rep.with_label(self.label.clone()))
    }

    /// Composition with the irreducible representation `tau_d`.
    pub fn tau(&self, d: usize) -> Result<Representation, RepError> {
        assert_eq!(self.dim, 2, "tau_d applies to SL(2) representations");
        let images = self.generators().iter().map(|g| tau_d(g, d)).collect();
        Representation::new(self.spec.clone(), images, format!("tau{d}({})", self.label))
    }

    /// Plain-text serialisation, 17 significant digits per entry.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "label: {}", self.label).unwrap();
        writeln!(s, "group: {}", group_token(self.spec.kind())).unwrap();
        writeln!(s, "dim: {}", self.dim).unwrap();
        for (i, m) in self.generators().iter().enumerate() {
            writeln!(s, "{}: {}", Generator::gen(i as u8).symbol(), matrix_line(m)).unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Representation, RepError> {
        let fields = parse_fields(text)?;
        let (spec, dim, label) = header(&fields)?;
        let images = (0..spec.rank())
            .map(|i| {
                let key = Generator::gen(i as u8).symbol().to_string();
                parse_matrix(field(&fields, &key)?, dim)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Representation::new(spec, images, label)
    }
}

fn group_token(kind: GroupKind) -> String {
    match kind {
        GroupKind::Free { rank } => format!("free {rank}"),
        GroupKind::SurfaceGenus2 => "surface_genus2".to_string(),
    }
}

fn matrix_line(m: &Matrix) -> String {
    m.as_slice()
        .iter()
        .map(|x| format!("{x:.16e}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn parse_fields(text: &str) -> Result<Vec<(String, String)>, RepError> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split_once(':')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| RepError::Parse(format!("missing ':' in line {l:?}")))
        })
        .collect()
}

fn field<'a>(fields: &'a [(String, String)], key: &str) -> Result<&'a str, RepError> {
    fields
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
        .ok_or_else(|| RepError::Parse(format!("missing field {key:?}")))
}

fn header(fields: &[(String, String)]) -> Result<(GroupSpec, usize, String), RepError> {
    let label = field(fields, "label")?.to_string();
    let group = field(fields, "group")?;
    let spec = match group.split_whitespace().collect::<Vec<_>>().as_slice() {
        ["surface_genus2"] => GroupSpec::surface_genus2(),
        ["free", k] => {
            let rank: usize = k
                .parse()
                .map_err(|_| RepError::Parse(format!("bad rank {k:?}")))?;
            if !(1..=13).contains(&rank) {
                return Err(RepError::Parse(format!("rank {rank} out of range")));
            }
            GroupSpec::free(rank)
        }
        _ => return Err(RepError::Parse(format!("unknown group {group:?}"))),
    };
    let dim: usize = field(fields, "dim")?
        .parse()
        .map_err(|_| RepError::Parse("bad dim".into()))?;
    Ok((spec, dim, label))
}

fn parse_matrix(s: &str, dim: usize) -> Result<Matrix, RepError> {
    let vals = s
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| RepError::Parse(format!("bad number {t:?}"))))
        .collect::<Result<Vec<_>, _>>()?;
    if vals.len() != dim * dim {
        return Err(RepError::Parse(format!(
            "expected {} entries, found {}",
            dim * dim,
            vals.len()
        )));
    }
    Ok(Matrix::from_row_major(dim, vals))
}

/// Evaluates words while reusing the product of the longest prefix shared
/// with the previously evaluated word. Products are formed left to right in
/// both cases, so results do not depend on the evaluation order.
pub struct PrefixEvaluator<'a> {
    rep: &'a Representation,
    word: Vec<Generator>,
    prefixes: Vec<Matrix>,
}

impl<'a> PrefixEvaluator<'a> {
    pub fn new(rep: &'a Representation) -> Self {
        PrefixEvaluator {
            rep,
            word: Vec::new(),
            prefixes: vec![Matrix::identity(rep.dim)],
        }
    }

    pub fn eval(&mut self, w: &[Generator]) -> &Matrix {
        let common = self.word.iter().zip(w).take_while(|(a, b)| a == b).count();
        self.word.truncate(common);
        self.prefixes.truncate(common + 1);
        for &g in &w[common..] {
            let next = self.prefixes.last().unwrap() * self.rep.image(g);
            self.prefixes.push(next);
            self.word.push(g);
        }
        &self.prefixes[w.len()]
    }
}

// ---------------------------------------------------------------------------
// SL(2) helpers

fn boundary_chart(p: BoundaryPoint) -> Option<f64> {
    match p {
        BoundaryPoint::Finite(x) => Some(x),
        BoundaryPoint::Infinity => None,
    }
}

/// Hyperbolic element with multiplier `lambda` (ratio of eigenvalues),
/// repelling fixed point `rep` and attracting fixed point `att`.
pub fn hyperbolic_sl2(lambda: f64, rep: BoundaryPoint, att: BoundaryPoint) -> Result<Matrix, RepError> {
    if !(lambda > 1.0) {
        return Err(RepError::PingPongFailure(format!("multiplier {lambda} must exceed 1")));
    }
    // c maps 0 -> rep and inf -> att
    let c = match (boundary_chart(att), boundary_chart(rep)) {
        (Some(a), Some(r)) if a != r => Matrix::from_rows(&[&[a, r], &[1.0, 1.0]]),
        (None, Some(r)) => Matrix::from_rows(&[&[1.0, r], &[0.0, 1.0]]),
        (Some(a), None) => Matrix::from_rows(&[&[a, 1.0], &[1.0, 0.0]]),
        _ => {
            return Err(RepError::PingPongFailure(
                "axis endpoints must be distinct".into(),
            ))
        }
    };
    let s = lambda.sqrt();
    let m = &(&c * &Matrix::diag(&[s, 1.0 / s])) * &c.inverse()?;
    Ok(m)
}

/// `z -> (z - i) / (z + i)` from the upper half-plane to the disk.
fn to_disk(z: Complex64) -> Complex64 {
    let i = Complex64::new(0.0, 1.0);
    (z - i) / (z + i)
}

fn mobius_c(m: &Matrix, z: Complex64) -> Complex64 {
    (z * m[(0, 0)] + m[(0, 1)]) / (z * m[(1, 0)] + m[(1, 1)])
}

/// `cosh` of the displacement of `i` under an SL(2) matrix.
pub fn cosh_displacement(m: &Matrix) -> f64 {
    0.5 * m.as_slice().iter().map(|x| x * x).sum::<f64>()
}

/// Boundary arc (centre angle, half-width) of the Dirichlet half-plane
/// `{x : d(x, g i) <= d(x, i)}` seen in the disk model.
fn dirichlet_arc(g: &Matrix) -> (f64, f64) {
    let d = cosh_displacement(g).max(1.0).acosh();
    let p = to_disk(mobius_c(g, Complex64::new(0.0, 1.0)));
    (p.arg(), (0.5 * d).tanh().acos())
}

/// Ping-pong certificate: the 2k Dirichlet arcs of the generators and their
/// inverses with respect to the base point `i`, all pairwise disjoint.
#[derive(Clone, Debug, PartialEq)]
pub struct PingPong {
    pub arcs: Vec<(f64, f64)>,
    /// Smallest angular gap between two arcs (positive when certified).
    pub min_gap: f64,
}

fn angular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

pub fn ping_pong_certificate(letters: &[Matrix]) -> PingPong {
    let arcs: Vec<(f64, f64)> = letters.iter().map(dirichlet_arc).collect();
    let mut min_gap = f64::INFINITY;
    for i in 0..arcs.len() {
        for j in i + 1..arcs.len() {
            let gap = angular_distance(arcs[i].0, arcs[j].0) - arcs[i].1 - arcs[j].1;
            min_gap = min_gap.min(gap);
        }
    }
    PingPong { arcs, min_gap }
}

/// Free-group representation into SL(2, R) with hyperbolic generators of the
/// given multipliers and axes `(repelling, attracting)`, certified by
/// ping-pong on Dirichlet half-planes.
pub fn schottky_sl2(
    multipliers: &[f64],
    axes: &[(BoundaryPoint, BoundaryPoint)],
) -> Result<(Representation, PingPong), RepError> {
    if multipliers.is_empty() || multipliers.len() != axes.len() {
        return Err(RepError::PingPongFailure(
            "need one axis per multiplier".into(),
        ));
    }
    let images = multipliers
        .iter()
        .zip(axes)
        .map(|(&l, &(r, a))| hyperbolic_sl2(l, r, a))
        .collect::<Result<Vec<_>, _>>()?;
    let rep = Representation::new(GroupSpec::free(images.len()), images, "schottky")?;
    let cert = ping_pong_certificate(&rep.letters);
    if multipliers.len() > 1 && !(cert.min_gap > 0.0) {
        return Err(RepError::PingPongFailure(format!(
            "Dirichlet arcs overlap (gap {:.3e})",
            cert.min_gap
        )));
    }
    Ok((rep, cert))
}

/// Rank-2 Schottky group with axes `(-1, 1)` and `(inf, 0)`.
pub fn schottky_default(lambda: f64) -> Result<Representation, RepError> {
    use BoundaryPoint::*;
    let (rep, _) = schottky_sl2(
        &[lambda, lambda],
        &[(Finite(-1.0), Finite(1.0)), (Infinity, Finite(0.0))],
    )?;
    Ok(rep.with_label(format!("schottky2(lambda={lambda})")))
}

fn disk_to_boundary(theta: f64) -> BoundaryPoint {
    // inverse Cayley map on the circle: w -> i (1 + w) / (1 - w)
    let w = Complex64::from_polar(1.0, theta);
    let den = Complex64::new(1.0, 0.0) - w;
    if den.norm() < 1e-15 {
        return BoundaryPoint::Infinity;
    }
    BoundaryPoint::Finite((Complex64::new(0.0, 1.0) * (Complex64::new(1.0, 0.0) + w) / den).re)
}

/// Random certified Schottky group of the given rank with multipliers drawn
/// from `lambda_range` (a degenerate range fixes them), balanced.
pub fn random_schottky<R: Rng>(
    rng: &mut R,
    rank: usize,
    lambda_range: (f64, f64),
) -> Result<Representation, RepError> {
    for _ in 0..10_000 {
        let mut angles: Vec<f64> = (0..2 * rank).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
        // random matching of endpoints into axes
        for i in (1..angles.len()).rev() {
            let j = rng.gen_range(0..=i);
            angles.swap(i, j);
        }
        let mults: Vec<f64> = (0..rank)
            .map(|_| {
                if lambda_range.0 == lambda_range.1 {
                    lambda_range.0
                } else {
                    rng.gen_range(lambda_range.0..lambda_range.1)
                }
            })
            .collect();
        let axes: Vec<(BoundaryPoint, BoundaryPoint)> = angles
            .chunks(2)
            .map(|p| (disk_to_boundary(p[0]), disk_to_boundary(p[1])))
            .collect();
        if let Ok((rep, _)) = schottky_sl2(&mults, &axes) {
            return Ok(rep.balanced()?.with_label("random-schottky"));
        }
    }
    Err(RepError::PingPongFailure(
        "no certified configuration found".into(),
    ))
}

// ---------------------------------------------------------------------------
// genus-2 octagon groups

/// Hyperbolic octagon in the Poincare disk, vertices listed counterclockwise.
/// Side `k` runs from vertex `k` to vertex `k + 1`; sides are paired
/// `0-2, 1-3, 4-6, 5-7`.
#[derive(Clone, Debug, PartialEq)]
pub struct Octagon {
    pub vertices: [Complex64; 8],
}

const SIDE_PAIRS: [(usize, usize); 4] = [(0, 2), (1, 3), (4, 6), (5, 7)];

/// Disk automorphism `z -> (z - p) / (1 - conj(p) z)`.
fn to_origin(p: Complex64) -> [Complex64; 4] {
    let one = Complex64::new(1.0, 0.0);
    let s = 1.0 / (1.0 - p.norm_sqr()).sqrt();
    [one * s, -p * s, -p.conj() * s, one * s]
}

fn apply_c(m: &[Complex64; 4], z: Complex64) -> Complex64 {
    (m[0] * z + m[1]) / (m[2] * z + m[3])
}

fn mul_c(x: &[Complex64; 4], y: &[Complex64; 4]) -> [Complex64; 4] {
    [
        x[0] * y[0] + x[1] * y[2],
        x[0] * y[1] + x[1] * y[3],
        x[2] * y[0] + x[3] * y[2],
        x[2] * y[1] + x[3] * y[3],
    ]
}

fn inv_c(m: &[Complex64; 4]) -> [Complex64; 4] {
    let det = m[0] * m[3] - m[1] * m[2];
    [m[3] / det, -m[1] / det, -m[2] / det, m[0] / det]
}

fn disk_distance(p: Complex64, q: Complex64) -> f64 {
    let r = apply_c(&to_origin(p), q).norm();
    2.0 * r.atanh()
}

impl Octagon {
    /// Regular octagon centred at the origin with the given interior angle.
    pub fn regular(angle: f64) -> Result<Octagon, RepError> {
        let cosh_r = (PI / 8.0).tan().recip() * (angle / 2.0).tan().recip();
        if !(angle > 0.0) || !(cosh_r > 1.0) {
            return Err(RepError::InvalidOctagon(format!(
                "no regular hyperbolic octagon with angle {angle}"
            )));
        }
        let r = (0.5 * cosh_r.acosh()).tanh();
        let vertices = std::array::from_fn(|k| {
            Complex64::from_polar(r, PI / 8.0 + k as f64 * PI / 4.0)
        });
        Ok(Octagon { vertices })
    }

    pub fn side_length(&self, k: usize) -> f64 {
        disk_distance(self.vertices[k % 8], self.vertices[(k + 1) % 8])
    }

    /// Interior angles, measured counterclockwise from the edge towards the
    /// next vertex to the edge towards the previous one.
    pub fn angles(&self) -> [f64; 8] {
        std::array::from_fn(|k| {
            let v = self.vertices[k];
            let m = to_origin(v);
            let next = apply_c(&m, self.vertices[(k + 1) % 8]).arg();
            let prev = apply_c(&m, self.vertices[(k + 7) % 8]).arg();
            (prev - next).rem_euclid(2.0 * PI)
        })
    }

    fn validate(&self) -> Result<(), RepError> {
        if self.vertices.iter().any(|v| !(v.norm() < 1.0)) {
            return Err(RepError::InvalidOctagon("vertices must lie in the open disk".into()));
        }
        let sum: f64 = self.angles().iter().sum();
        if (sum - 2.0 * PI).abs() > 1e-9 {
            return Err(RepError::InvalidOctagon(format!(
                "angle sum {sum} differs from 2*pi (orientation or angles wrong)"
            )));
        }
        for (i, j) in SIDE_PAIRS {
            let (li, lj) = (self.side_length(i), self.side_length(j));
            if (li - lj).abs() > 1e-9 * li.max(1.0) {
                return Err(RepError::InvalidOctagon(format!(
                    "paired sides {i} and {j} have lengths {li} and {lj}"
                )));
            }
        }
        Ok(())
    }

    /// Orientation-preserving isometry taking side `i` onto side `j` with
    /// reversed orientation.
    fn pairing(&self, i: usize, j: usize) -> [Complex64; 4] {
        let (p, q) = (self.vertices[i], self.vertices[(i + 1) % 8]);
        let (p2, q2) = (self.vertices[(j + 1) % 8], self.vertices[j]);
        let a = to_origin(p);
        let b = to_origin(p2);
        let th = apply_c(&b, q2).arg() - apply_c(&a, q).arg();
        let half = Complex64::from_polar(1.0, th / 2.0);
        let rot = [half, Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), half.conj()];
        mul_c(&inv_c(&b), &mul_c(&rot, &a))
    }
}

/// Disk-model Mobius map as a real SL(2) matrix acting on the upper
/// half-plane.
fn disk_to_sl2(m: &[Complex64; 4]) -> Matrix {
    let i = Complex64::new(0.0, 1.0);
    let one = Complex64::new(1.0, 0.0);
    let c = [one, -i, one, i];
    let n = mul_c(&inv_c(&c), &mul_c(m, &c));
    let det = (n[0] * n[3] - n[1] * n[2]).sqrt();
    Matrix::from_rows(&[&[(n[0] / det).re, (n[1] / det).re], &[(n[2] / det).re, (n[3] / det).re]])
}

/// Genus-2 Fuchsian representation from the side pairings of an octagon.
pub fn fuchsian_genus2(octagon: &Octagon) -> Result<Representation, RepError> {
    octagon.validate()?;
    let p: Vec<Matrix> = SIDE_PAIRS
        .iter()
        .map(|&(i, j)| disk_to_sl2(&octagon.pairing(i, j)))
        .collect();
    let images = vec![
        inverse_of(&p[0])?,
        p[1].clone(),
        inverse_of(&p[2])?,
        p[3].clone(),
    ];
    Representation::new(GroupSpec::surface_genus2(), images, "fuchsian-genus2")
}

/// Fuchsian representation of the regular octagon with angles `pi/4`.
pub fn fuchsian_regular() -> Result<Representation, RepError> {
    fuchsian_genus2(&Octagon::regular(PI / 4.0)?).map(|r| r.with_label("fuchsian-regular"))
}

/// Logarithm of a hyperbolic SL(2) matrix (of `-g` when the trace is
/// negative).
pub fn log_hyperbolic_sl2(g: &Matrix) -> Result<Matrix, RepError> {
    let tr = g.trace();
    let g = if tr < 0.0 { g.scale(-1.0) } else { g.clone() };
    let half = 0.5 * tr.abs();
    if !(half > 1.0) {
        return Err(MatError::NotProximal { gap: 1.0 }.into());
    }
    let l = half.acosh();
    let mut y = g;
    y[(0, 0)] -= half;
    y[(1, 1)] -= half;
    Ok(y.scale(l / l.sinh()))
}

/// Twist deformation of a genus-2 representation: `b -> b exp(t log a)` and
/// `d -> d exp(t s log c)`. Both keep `[a,b][c,d]` exactly trivial.
pub fn twist_path(base: &Representation, weights: (f64, f64), epsilon: f64) -> Result<RepPath, RepError> {
    assert!(base.spec.is_surface() && base.dim == 2);
    let g = base.generators();
    let ya = log_hyperbolic_sl2(&g[0])?.scale(weights.0);
    let yc = log_hyperbolic_sl2(&g[2])?.scale(weights.1);
    let xb = &(&g[1] * &ya) * &inverse_of(&g[1])?;
    let xd = &(&g[3] * &yc) * &inverse_of(&g[3])?;
    let z = Matrix::zeros(2);
    make_path(base, vec![z.clone(), xb, z, xd], epsilon)
}

// ---------------------------------------------------------------------------
// symmetric powers

fn binomial_poly(c0: f64, c1: f64, m: usize) -> Vec<f64> {
    // (c0 + c1 y)^m, coefficients by ascending power of y
    let mut p = vec![1.0];
    for _ in 0..m {
        let mut next = vec![0.0; p.len() + 1];
        for (i, x) in p.iter().enumerate() {
            next[i] += x * c0;
            next[i + 1] += x * c1;
        }
        p = next;
    }
    p
}

/// `tau_d(g)` in the basis `x^{d-1}, x^{d-2} y, ..., y^{d-1}`, where `g` acts
/// by `x -> g11 x + g21 y`, `y -> g12 x + g22 y`.
pub fn tau_d(g: &Matrix, d: usize) -> Matrix {
    assert_eq!(g.dim(), 2);
    assert!(d >= 1);
    let (g11, g12, g21, g22) = (g[(0, 0)], g[(0, 1)], g[(1, 0)], g[(1, 1)]);
    let mut t = Matrix::zeros(d);
    for k in 0..d {
        let px = binomial_poly(g11, g21, d - 1 - k);
        let py = binomial_poly(g12, g22, k);
        for (i, a) in px.iter().enumerate() {
            for (j, b) in py.iter().enumerate() {
                t[(i + j, k)] += a * b;
            }
        }
    }
    t
}

/// Derivative of `tau_d` at the identity applied to `x` in sl(2).
pub fn tau_d_lie(x: &Matrix, d: usize) -> Matrix {
    assert_eq!(x.dim(), 2);
    let (x11, x12, x21, x22) = (x[(0, 0)], x[(0, 1)], x[(1, 0)], x[(1, 1)]);
    let mut t = Matrix::zeros(d);
    for k in 0..d {
        let m = (d - 1 - k) as f64;
        let kk = k as f64;
        t[(k, k)] += m * x11 + kk * x22;
        if k + 1 < d {
            t[(k + 1, k)] += m * x21;
        }
        if k > 0 {
            t[(k - 1, k)] += kk * x12;
        }
    }
    t
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Bilinear form preserved by `tau_d(SL(2))`: `tau_d(g)^T J tau_d(g) = J`.
/// Symmetric for odd `d`, skew for even `d`.
pub fn tau_invariant_form(d: usize) -> Matrix {
    let mut j = Matrix::zeros(d);
    for k in 0..d {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        j[(k, d - 1 - k)] = sign / binomial(d - 1, k);
    }
    j
}

// ---------------------------------------------------------------------------
// paths

/// One-parameter family `A_i(t) = exp(t X_i) A_i(0)` on `[-epsilon, epsilon]`.
#[derive(Clone, Debug)]
pub struct RepPath {
    base: Representation,
    directions: Vec<Matrix>,
    epsilon: f64,
    label: String,
}

/// Sample points used to check path constraints, as fractions of epsilon.
const PATH_SAMPLES: [f64; 5] = [-1.0, -0.5, 0.0, 0.5, 1.0];

pub fn make_path(rho: &Representation, directions: Vec<Matrix>, epsilon: f64) -> Result<RepPath, RepError> {
    if directions.len() != rho.spec.rank() {
        return Err(RepError::WrongGeneratorCount {
            expected: rho.spec.rank(),
            got: directions.len(),
        });
    }
    if directions.iter().any(|x| x.dim() != rho.dim) {
        return Err(RepError::DimensionMismatch { expected: rho.dim });
    }
    let path = RepPath {
        base: rho.clone(),
        directions,
        epsilon,
        label: format!("path({})", rho.label),
    };
    if rho.spec.is_surface() {
        for s in PATH_SAMPLES {
            // Representation::new rejects relator violations
            path.at(s * epsilon)?;
        }
    }
    Ok(path)
}

impl RepPath {
    pub fn base(&self) -> &Representation {
        &self.base
    }

    pub fn directions(&self) -> &[Matrix] {
        &self.directions
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn is_constant(&self) -> bool {
        self.directions.iter().all(|x| x.max_abs() == 0.0)
    }

    pub fn at(&self, t: f64) -> Result<Representation, RepError> {
        if t == 0.0 {
            return Ok(self.base.clone());
        }
        let images = self
            .base
            .generators()
            .iter()
            .zip(&self.directions)
            .map(|(a, x)| {
                if x.max_abs() == 0.0 {
                    a.clone()
                } else {
                    &x.scale(t).exp() * a
                }
            })
            .collect();
        Representation::new(self.base.spec.clone(), images, format!("{}@{t}", self.label))
    }

    /// Composition with `tau_d`, using the derivative of `tau_d` on the
    /// directions.
    pub fn tau(&self, d: usize) -> Result<RepPath, RepError> {
        let base = self.base.tau(d)?;
        let dirs = self.directions.iter().map(|x| tau_d_lie(x, d)).collect();
        Ok(make_path(&base, dirs, self.epsilon)?.with_label(format!("tau{d}({})", self.label)))
    }

    pub fn to_text(&self) -> String {
        let mut s = self.base.to_text();
        writeln!(s, "path: {}", self.label).unwrap();
        writeln!(s, "epsilon: {:.16e}", self.epsilon).unwrap();
        for (i, x) in self.directions.iter().enumerate() {
            writeln!(s, "direction {}: {}", Generator::gen(i as u8).symbol(), matrix_line(x)).unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<RepPath, RepError> {
        let fields = parse_fields(text)?;
        let (spec, dim, label) = header(&fields)?;
        let mut images = Vec::new();
        let mut dirs = Vec::new();
        for i in 0..spec.rank() {
            let sym = Generator::gen(i as u8).symbol();
            images.push(parse_matrix(field(&fields, &sym.to_string())?, dim)?);
            dirs.push(parse_matrix(field(&fields, &format!("direction {sym}"))?, dim)?);
        }
        let eps: f64 = field(&fields, "epsilon")?
            .parse()
            .map_err(|_| RepError::Parse("bad epsilon".into()))?;
        let base = Representation::new(spec, images, label)?;
        Ok(make_path(&base, dirs, eps)?.with_label(field(&fields, "path")?))
    }
}

/// Form `J` with `(rho(g)^{-1})^T = J rho(g) J^{-1}` for every generator.
#[derive(Clone, Debug)]
pub struct ContragredientData {
    pub form: Matrix,
}

impl ContragredientData {
    pub fn for_tau(d: usize) -> Self {
        ContragredientData {
            form: tau_invariant_form(d),
        }
    }

    /// Largest residual of `J X - X^T J` relative to `|X|`.
    pub fn direction_residual(&self, x: &Matrix) -> f64 {
        let j = &self.form;
        let r = (&(j * x) - &(&x.transpose() * j)).max_abs();
        r / x.max_abs().max(f64::MIN_POSITIVE)
    }

    /// `(X + J^{-1} X^T J) / 2`, the part of `X` the contragredient
    /// involution negates.
    pub fn symmetrize(&self, x: &Matrix) -> Matrix {
        let ji = self.form.inverse().expect("invariant form is invertible");
        let y = &(&ji * &x.transpose()) * &self.form;
        (x + &y).scale(0.5)
    }

    /// `(X - J^{-1} X^T J) / 2`.
    pub fn antisymmetrize(&self, x: &Matrix) -> Matrix {
        let ji = self.form.inverse().expect("invariant form is invertible");
        let y = &(&ji * &x.transpose()) * &self.form;
        (x - &y).scale(0.5)
    }

    /// Residual of `(A^{-1})^T = J A J^{-1}`.
    pub fn symmetry_residual(&self, a: &Matrix) -> Result<f64, MatError> {
        let lhs = a.inverse()?.transpose();
        let rhs = &(&self.form * a) * &self.form.inverse()?;
        Ok(lhs.max_diff(&rhs) / lhs.max_abs().max(1.0))
    }
}

/// Path along which the contragredient involution acts by `t -> -t`.
pub fn contragredient_path(
    rho: &Representation,
    data: &ContragredientData,
    directions: Vec<Matrix>,
    epsilon: f64,
) -> Result<RepPath, RepError> {
    for g in rho.generators() {
        let r = data.symmetry_residual(&g)?;
        if r > 1e-7 {
            return Err(RepError::SymmetryViolation { residual: r });
        }
    }
    for x in &directions {
        if x.max_abs() == 0.0 {
            continue;
        }
        let r = data.direction_residual(x);
        if r > 1e-9 {
            return Err(RepError::SymmetryViolation { residual: r });
        }
    }
    let path = make_path(rho, directions, epsilon)?;
    let ji = data.form.inverse()?;
    for s in PATH_SAMPLES {
        let t = s * epsilon;
        let (plus, minus) = (path.at(t)?, path.at(-t)?);
        for (a, b) in plus.generators().iter().zip(minus.generators()) {
            let lhs = a.inverse()?.transpose();
            let rhs = &(&data.form * &b) * &ji;
            let r = lhs.max_diff(&rhs) / lhs.max_abs().max(1.0);
            if r > 1e-7 {
                return Err(RepError::SymmetryViolation { residual: r });
            }
        }
    }
    Ok(path.with_label(format!("contragredient({})", rho.label)))
}

/// Random trace-free matrix with entries uniform in `[-scale, scale]`.
pub fn random_tracefree<R: Rng>(rng: &mut R, d: usize, scale: f64) -> Matrix {
    let mut x = Matrix::from_row_major(d, (0..d * d).map(|_| rng.gen_range(-scale..scale)).collect());
    let tr = x.trace() / d as f64;
    for i in 0..d {
        x[(i, i)] -= tr;
    }
    x
}

// ---------------------------------------------------------------------------
// metric pruning

/// Prefix filter rejecting words whose prefixes move the base point `i` of
/// the upper half-plane farther than a bound. SL(2) only.
#[derive(Clone, Debug)]
pub struct DisplacementGuard {
    letters: Arc<Vec<[f64; 4]>>,
    current: [f64; 4],
    /// Bound on the squared Frobenius norm, `2 cosh(max displacement)`.
    bound: f64,
}

impl DisplacementGuard {
    pub fn new(rho: &Representation, max_displacement: f64) -> Self {
        assert_eq!(rho.dim, 2, "displacement pruning needs an SL(2) representation");
        let letters = rho
            .letters
            .iter()
            .map(|m| [m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]])
            .collect();
        DisplacementGuard {
            letters: Arc::new(letters),
            current: [1.0, 0.0, 0.0, 1.0],
            bound: 2.0 * max_displacement.cosh(),
        }
    }
}

impl PrefixGuard for DisplacementGuard {
    fn extend(&self, g: Generator) -> Option<Self> {
        let x = &self.current;
        let y = &self.letters[g.index()];
        let m = [
            x[0] * y[0] + x[1] * y[2],
            x[0] * y[1] + x[1] * y[3],
            x[2] * y[0] + x[3] * y[2],
            x[2] * y[1] + x[3] * y[3],
        ];
        let norm2: f64 = m.iter().map(|v| v * v).sum();
        if norm2 > self.bound {
            return None;
        }
        Some(DisplacementGuard {
            letters: Arc::clone(&self.letters),
            current: m,
            bound: self.bound,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matnum::{eigen, spectral_radius};
    use crate::words::reduce;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_sl2(rng: &mut ChaCha8Rng) -> Matrix {
        loop {
            let m = Matrix::from_row_major(2, (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect());
            let det = m.det();
            if det.abs() > 0.1 {
                let m = if det < 0.0 {
                    Matrix::from_rows(&[&[m[(0, 1)], m[(0, 0)]], &[m[(1, 1)], m[(1, 0)]]])
                } else {
                    m
                };
                return m.scale(1.0 / m.det().sqrt());
            }
        }
    }

    fn random_word(rng: &mut ChaCha8Rng, rank: usize, len: usize) -> Word {
        let mut w = Vec::new();
        while w.len() < len {
            let g = Generator::new(rng.gen_range(0..2 * rank) as u8);
            if w.last().is_some_and(|&l: &Generator| l == g.inverse()) {
                continue;
            }
            w.push(g);
        }
        Word::new(w)
    }

    #[test]
    fn evaluate_identities() {
        let rho = schottky_default(9.0).unwrap();
        assert_eq!(rho.evaluate(&Word::identity()), Matrix::identity(2));
        let m = rho.evaluate(&"aA".parse().unwrap());
        assert!(m.max_diff(&Matrix::identity(2)) < 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let u = random_word(&mut rng, 2, 5);
            let v = random_word(&mut rng, 2, 6);
            let uv = reduce(&u.concat(&v));
            let lhs = rho.evaluate(&uv);
            let rhs = &rho.evaluate(&u) * &rho.evaluate(&v);
            assert!(lhs.max_diff(&rhs) < 1e-10 * rhs.max_abs().max(1.0));
        }
    }

    #[test]
    fn prefix_evaluator_matches_direct() {
        let rho = schottky_default(9.0).unwrap().tau(3).unwrap();
        let mut ev = PrefixEvaluator::new(&rho);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let len = rng.gen_range(1..8);
            let w = random_word(&mut rng, 2, len);
            let direct = rho.evaluate(&w);
            assert_eq!(ev.eval(w.letters()), &direct);
        }
    }

    #[test]
    fn schottky_single_generator() {
        use BoundaryPoint::*;
        let (rho, _) = schottky_sl2(&[4.0], &[(Finite(0.0), Infinity)]).unwrap();
        let a = &rho.generators()[0];
        assert!(a.max_diff(&Matrix::diag(&[2.0, 0.5])) < 1e-15);
    }

    #[test]
    fn schottky_words_are_hyperbolic() {
        let rho = schottky_default(9.0).unwrap();
        let spec = GroupSpec::free(2);
        // every reduced word of length <= 6
        let mut stack: Vec<Vec<Generator>> = vec![vec![]];
        let mut count = 0;
        while let Some(w) = stack.pop() {
            if !w.is_empty() {
                let tr = rho.evaluate_letters(&w).trace().abs();
                assert!(tr > 2.0, "{} has trace {tr}", Word::new(w.clone()));
                count += 1;
            }
            if w.len() < 6 {
                for g in spec.alphabet() {
                    if w.last().is_some_and(|l| *l == g.inverse()) {
                        continue;
                    }
                    let mut n = w.clone();
                    n.push(g);
                    stack.push(n);
                }
            }
        }
        assert_eq!(count, 4 + 12 + 36 + 108 + 324 + 972);
    }

    #[test]
    fn overlapping_axes_fail_ping_pong() {
        use BoundaryPoint::*;
        let r = schottky_sl2(
            &[1.5, 1.5],
            &[(Finite(-1.0), Finite(1.0)), (Infinity, Finite(0.0))],
        );
        assert!(matches!(r, Err(RepError::PingPongFailure(_))));
    }

    #[test]
    fn random_schottky_is_certified() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let rho = random_schottky(&mut rng, 2, (7.0, 16.0)).unwrap();
            let cert = ping_pong_certificate(&rho.letters);
            assert!(cert.min_gap > 0.0);
        }
    }

    #[test]
    fn regular_octagon_relator() {
        let rho = fuchsian_regular().unwrap();
        assert!(rho.relator_defect() < 1e-12, "{}", rho.relator_defect());
        for g in rho.generators() {
            assert!(g.trace().abs() > 2.0);
            assert!((g.trace().abs() - (2.0 + 2f64.sqrt())).abs() < 1e-12);
        }
    }

    #[test]
    fn octagon_angle_checks() {
        let oct = Octagon::regular(PI / 4.0).unwrap();
        for a in oct.angles() {
            assert!((a - PI / 4.0).abs() < 1e-12);
        }
        let mut rev = oct.clone();
        rev.vertices.reverse();
        assert!(matches!(fuchsian_genus2(&rev), Err(RepError::InvalidOctagon(_))));
        let wrong = Octagon::regular(PI / 5.0).unwrap();
        assert!(matches!(fuchsian_genus2(&wrong), Err(RepError::InvalidOctagon(_))));
    }

    #[test]
    fn tau_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = random_sl2(&mut rng);
        assert!(tau_d(&g, 2).max_diff(&g) < 1e-15);
        let t = tau_d(&Matrix::diag(&[3.0, 1.0 / 3.0]), 3);
        assert!(t.max_diff(&Matrix::diag(&[9.0, 1.0, 1.0 / 9.0])) < 1e-14);
    }

    #[test]
    fn tau_is_homomorphism_with_expected_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for d in 3..=6 {
            for _ in 0..20 {
                let g = random_sl2(&mut rng);
                let h = random_sl2(&mut rng);
                let lhs = tau_d(&(&g * &h), d);
                let rhs = &tau_d(&g, d) * &tau_d(&h, d);
                assert!(lhs.max_diff(&rhs) <= 1e-8 * lhs.norm_fro());
                if g.trace().abs() > 2.0 {
                    let l = spectral_radius(&g).unwrap();
                    let e = eigen(&tau_d(&g, d)).unwrap();
                    for (k, z) in e.eigenvalues.iter().enumerate() {
                        let expect = l.powi(d as i32 - 1 - 2 * k as i32);
                        assert!((z.norm() - expect).abs() <= 1e-9 * expect.max(1.0));
                    }
                }
            }
        }
    }

    #[test]
    fn tau_lie_is_derivative() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for d in 2..=5 {
            let x = random_tracefree(&mut rng, 2, 1.0);
            let lhs = tau_d(&x.exp(), d);
            let rhs = tau_d_lie(&x, d).exp();
            assert!(lhs.max_diff(&rhs) < 1e-10 * lhs.max_abs());
        }
    }

    #[test]
    fn invariant_form_preserved() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for d in 2..=6 {
            let j = tau_invariant_form(d);
            for _ in 0..5 {
                let t = tau_d(&random_sl2(&mut rng), d);
                let lhs = &(&t.transpose() * &j) * &t;
                assert!(lhs.max_diff(&j) < 1e-9 * t.max_abs().powi(2), "d={d}");
            }
            let sym = if d % 2 == 1 { 1.0 } else { -1.0 };
            assert!(j.transpose().max_diff(&j.scale(sym)) == 0.0);
        }
    }

    #[test]
    fn constant_path_is_constant() {
        let rho = schottky_default(9.0).unwrap().tau(3).unwrap();
        let p = make_path(&rho, vec![Matrix::zeros(3); 2], 0.01).unwrap();
        let at = p.at(0.01).unwrap();
        assert_eq!(at.generators(), rho.generators());
        let data = ContragredientData::for_tau(3);
        contragredient_path(&rho, &data, vec![Matrix::zeros(3); 2], 0.01).unwrap();
    }

    #[test]
    fn free_path_is_analytic() {
        // samples of an entry of A(t) are fitted by a low-degree polynomial
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rho = schottky_default(9.0).unwrap().tau(3).unwrap();
        let dirs = (0..2).map(|_| random_tracefree(&mut rng, 3, 0.3)).collect();
        let p = make_path(&rho, dirs, 0.01).unwrap();
        let ts: Vec<f64> = (-4..=4).map(|k| k as f64 * 0.0025).collect();
        let ys: Vec<f64> = ts.iter().map(|&t| p.at(t).unwrap().generators()[0][(0, 1)]).collect();
        // fifth finite difference of a smooth function at this spacing is tiny
        let mut diffs = ys.clone();
        for _ in 0..5 {
            diffs = diffs.windows(2).map(|w| w[1] - w[0]).collect();
        }
        let scale = ys.iter().fold(0.0f64, |m, y| m.max(y.abs()));
        assert!(diffs.iter().all(|d| d.abs() < 1e-9 * scale));
    }

    #[test]
    fn twist_path_preserves_relator() {
        let rho = fuchsian_regular().unwrap();
        let path = twist_path(&rho, (1.0, 0.5), 0.1).unwrap();
        for t in [-0.1, 0.03, 0.1] {
            assert!(path.at(t).unwrap().relator_defect() < 1e-10);
        }
        let lifted = path.tau(3).unwrap();
        for t in [-0.1, 0.05, 0.1] {
            assert!(lifted.at(t).unwrap().relator_defect() < 1e-6);
        }
    }

    #[test]
    fn surface_path_violating_relator_rejected() {
        let rho = fuchsian_regular().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let dirs = (0..4).map(|_| random_tracefree(&mut rng, 2, 1.0)).collect();
        assert!(matches!(
            make_path(&rho, dirs, 0.1),
            Err(RepError::RelatorViolation { .. })
        ));
    }

    #[test]
    fn antisymmetric_directions_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let rho = schottky_default(9.0).unwrap().tau(3).unwrap();
        let data = ContragredientData::for_tau(3);
        let sym: Vec<Matrix> = (0..2)
            .map(|_| data.symmetrize(&random_tracefree(&mut rng, 3, 0.3)))
            .collect();
        contragredient_path(&rho, &data, sym, 0.05).unwrap();
        let anti: Vec<Matrix> = (0..2)
            .map(|_| data.antisymmetrize(&random_tracefree(&mut rng, 3, 0.3)))
            .collect();
        assert!(matches!(
            contragredient_path(&rho, &data, anti, 0.05),
            Err(RepError::SymmetryViolation { .. })
        ));
    }

    #[test]
    fn text_round_trip() {
        let rho = fuchsian_regular().unwrap();
        let back = Representation::from_text(&rho.to_text()).unwrap();
        assert_eq!(back.generators(), rho.generators());
        assert_eq!(back.label(), rho.label());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = schottky_default(9.0).unwrap().tau(3).unwrap();
        let dirs = (0..2).map(|_| random_tracefree(&mut rng, 3, 0.3)).collect();
        let p = make_path(&s, dirs, 0.02).unwrap();
        let q = RepPath::from_text(&p.to_text()).unwrap();
        assert_eq!(q.directions(), p.directions());
        assert_eq!(q.epsilon(), p.epsilon());
        assert!(Representation::from_text("label: x\ngroup: free 2\ndim: 2\na: 1 0 0 1\n").is_err());
    }

    #[test]
    fn displacement_guard_bounds_prefixes() {
        let rho = fuchsian_regular().unwrap();
        let a = Generator::gen(0);
        let da = cosh_displacement(rho.image(a)).acosh();
        // at least the translation length
        assert!(da >= 2.0 * (1.0 + 0.5 * 2f64.sqrt()).acosh() - 1e-12);
        let guard = DisplacementGuard::new(&rho, da + 1e-9);
        let g1 = guard.extend(a).unwrap();
        assert!(g1.extend(a).is_none());
        assert!(DisplacementGuard::new(&rho, da - 1e-9).extend(a).is_none());
    }

    #[test]
    fn balancing_preserves_traces() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let rho = random_schottky(&mut rng, 2, (3.0, 8.0)).unwrap();
            let far = rho.conjugate(&Matrix::from_rows(&[&[4.0, 3.0], &[0.0, 0.25]])).unwrap();
            let back = far.balanced().unwrap();
            let cost = |r: &Representation| -> f64 { r.generators().iter().map(cosh_displacement).sum() };
            assert!(cost(&back) <= cost(&far));
            for w in [vec![0u8], vec![2], vec![0, 2], vec![0, 3, 2]] {
                let w: Vec<Generator> = w.into_iter().map(Generator::new).collect();
                let (x, y) = (far.evaluate_letters(&w).trace(), back.evaluate_letters(&w).trace());
                assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0), "{x} vs {y}");
            }
        }
    }
}
