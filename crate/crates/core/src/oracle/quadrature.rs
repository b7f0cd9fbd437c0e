//! Tensor-product quadrature over at most four integrated sites.
//!
//! Each integrated site gets a one-dimensional grid split into panels at the
//! relevant breakpoints (`±a` of the well, tail thresholds, lower bounds), so
//! every indicator in the integrand is constant on each cell.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gaussian::gaussian_covariance;
use super::pinned_set::PinnedSet;
use super::result::{ExactResult, ExactValue, NamedValue};
use crate::error::{Error, Result};
use crate::model::{Couplings, InteractionSpec, Lattice, PinningSpec};

pub const MAX_QUADRATURE_SITES: usize = 4;

/// Mass allowed on the outermost cells before the truncation is rejected.
pub const EDGE_MASS_LIMIT: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureRule {
    #[default]
    Midpoint,
    GaussLegendre,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureScheme {
    pub points_per_dim: usize,
    /// `None` picks the half-width from the interaction and the lattice.
    pub half_width: Option<f64>,
    pub rule: QuadratureRule,
}

impl Default for QuadratureScheme {
    fn default() -> Self {
        QuadratureScheme {
            points_per_dim: 96,
            half_width: None,
            rule: QuadratureRule::Midpoint,
        }
    }
}

impl QuadratureScheme {
    pub fn with_points(points_per_dim: usize) -> Self {
        QuadratureScheme {
            points_per_dim,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.points_per_dim < 16 {
            return Err(Error::param(
                "points_per_dim",
                format!("must be >= 16, got {}", self.points_per_dim),
            ));
        }
        if let Some(h) = self.half_width {
            if !(h > 0.0) || !h.is_finite() {
                return Err(Error::param("half_width", format!("must be > 0, got {h}")));
            }
        }
        Ok(())
    }
}

/// Restriction on the height of one site.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SiteConstraint {
    Free,
    /// `|h| ≤ a`.
    Window(f64),
    /// `h ≥ l`.
    AtLeast(f64),
    /// Height held at a value; the site is not integrated.
    Fixed(f64),
}

/// Quantity averaged against the measure.
#[derive(Clone)]
pub enum Observable {
    Mean(usize),
    Product(usize, usize),
    Abs(usize),
    /// `1{h_i > T}`
    Exceeds(usize, f64),
    /// `1{|h_i| ≤ a}`
    Within(usize, f64),
    /// Arbitrary bounded function of the full height vector.
    Custom {
        name: String,
        f: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    },
}

impl Observable {
    pub fn second_moment(i: usize) -> Self {
        Observable::Product(i, i)
    }

    pub fn custom(name: impl Into<String>, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Observable::Custom {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Observable::Mean(i) => format!("h[{i}]"),
            Observable::Product(i, j) if i == j => format!("h[{i}]^2"),
            Observable::Product(i, j) => format!("h[{i}]*h[{j}]"),
            Observable::Abs(i) => format!("|h[{i}]|"),
            Observable::Exceeds(i, t) => format!("P(h[{i}]>{t})"),
            Observable::Within(i, a) => format!("P(|h[{i}]|<={a})"),
            Observable::Custom { name, .. } => name.clone(),
        }
    }

    fn single(&self) -> Option<(usize, Box<dyn Fn(f64) -> f64>)> {
        Some(match *self {
            Observable::Mean(i) => (i, Box::new(|x| x)),
            Observable::Abs(i) => (i, Box::new(f64::abs)),
            Observable::Exceeds(i, t) => (i, Box::new(move |x| f64::from(u8::from(x > t)))),
            Observable::Within(i, a) => (i, Box::new(move |x| f64::from(u8::from(x.abs() <= a)))),
            _ => return None,
        })
    }

    fn breakpoints(&self) -> Vec<(usize, f64)> {
        match *self {
            Observable::Exceeds(i, t) => vec![(i, t)],
            Observable::Within(i, a) => vec![(i, -a), (i, a)],
            Observable::Abs(i) => vec![(i, 0.0)],
            _ => Vec::new(),
        }
    }
}

impl fmt::Debug for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// The Gibbs measure on a small lattice with per-site constraints and an
/// optional square-well weight `1 + (e^ε − 1)·1{|h| ≤ a}` on unconstrained sites.
#[derive(Clone)]
pub struct ExactMeasure {
    lattice: Lattice,
    spec: InteractionSpec,
    couplings: Couplings,
    constraints: Vec<SiteConstraint>,
    well: Option<(f64, f64)>,
    scheme: QuadratureScheme,
}

impl ExactMeasure {
    pub fn new(lattice: &Lattice, spec: &InteractionSpec, scheme: QuadratureScheme) -> Result<Self> {
        scheme.validate()?;
        Ok(ExactMeasure {
            lattice: lattice.clone(),
            spec: spec.clone(),
            couplings: Couplings::new(lattice, spec),
            constraints: vec![SiteConstraint::Free; lattice.len()],
            well: None,
            scheme,
        })
    }

    pub fn constrain(mut self, site: usize, c: SiteConstraint) -> Self {
        self.constraints[site] = c;
        self
    }

    /// Applies `c` to every member of `set`.
    pub fn constrain_set(mut self, set: &PinnedSet, c: SiteConstraint) -> Self {
        for i in set.iter() {
            self.constraints[i] = c;
        }
        self
    }

    /// Weights each `Free`/`AtLeast` site by `1 + (e^ε − 1)·1{|h| ≤ a}`.
    pub fn with_square_well(mut self, strength: f64, half_width: f64) -> Self {
        self.well = Some((half_width, strength.exp()));
        self
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    fn integrated(&self) -> Vec<usize> {
        (0..self.lattice.len())
            .filter(|&i| !matches!(self.constraints[i], SiteConstraint::Fixed(_)))
            .collect()
    }

    /// Truncation half-width: the larger of `12/√(Ψ''_min · min bond count)` and
    /// eight comparison-Gaussian standard deviations.
    pub fn auto_half_width(&self) -> Result<f64> {
        let floor = self.spec.floor();
        let integrated = self.integrated();
        let min_bonds = integrated
            .iter()
            .map(|&i| self.couplings.bond_range(i).len())
            .min()
            .unwrap_or(1)
            .max(1);
        let by_bonds = 12.0 / (floor * min_bonds as f64).sqrt();
        let fixed: Vec<usize> = (0..self.lattice.len())
            .filter(|&i| matches!(self.constraints[i], SiteConstraint::Fixed(_)))
            .collect();
        let cmp = gaussian_covariance(
            &self.lattice.with_boundary_value(0.0),
            &self.spec.comparison_gaussian(),
            &PinnedSet::from_indices(self.lattice.len(), &fixed),
        )?;
        let max_var = integrated.iter().map(|&i| cmp.cov(i, i)).fold(0.0, f64::max);
        Ok(by_bonds.max(8.0 * (max_var / floor).sqrt()))
    }

    /// Integrates `observables` at `n` and `n/2` points per dimension. The
    /// midpoint rule reports the Richardson combination of the two; the error
    /// estimate is always `|result(n) − result(n/2)|`.
    pub fn evaluate(&self, observables: &[Observable]) -> Result<ExactResult> {
        let integrated = self.integrated();
        if integrated.len() > MAX_QUADRATURE_SITES {
            return Err(Error::TooLarge {
                what: "integrated sites for quadrature",
                size: integrated.len(),
                limit: MAX_QUADRATURE_SITES,
            });
        }
        let half_width = match self.scheme.half_width {
            Some(h) => h,
            None => self.auto_half_width()?,
        };
        let n = self.scheme.points_per_dim;
        // identical panels at both resolutions, the fine grid halving every cell
        let fine = self.integrate(observables, n / 2, 2, half_width, true)?;
        let coarse = self.integrate(observables, n / 2, 1, half_width, false)?;
        let rescale = (coarse.log_scale - fine.log_scale).exp();
        let (zf, zc) = (fine.z, coarse.z * rescale);
        let extrapolate = |f: f64, c: f64| match self.scheme.rule {
            QuadratureRule::Midpoint => (4.0 * f - c) / 3.0,
            QuadratureRule::GaussLegendre => f,
        };
        let z_rel = extrapolate(zf, zc);
        let z = z_rel * fine.log_scale.exp();
        let z_err = (zf - zc).abs() * fine.log_scale.exp();
        let moments = observables
            .iter()
            .enumerate()
            .map(|(k, o)| {
                let v = extrapolate(fine.sums[k], coarse.sums[k] * rescale) / z_rel;
                let vf = fine.sums[k] / fine.z;
                let vc = coarse.sums[k] / coarse.z;
                NamedValue {
                    name: o.label(),
                    value: ExactValue {
                        value: v,
                        error_estimate: (vf - vc).abs(),
                    },
                }
            })
            .collect();
        Ok(ExactResult {
            method: format!("quadrature-{}", rule_name(self.scheme.rule)),
            params: serde_json::json!({
                "sites": self.lattice.len(),
                "integrated": integrated.len(),
                "points_per_dim": n,
                "half_width": half_width,
                "boundary_value": self.lattice.boundary_value(),
                "interaction": self.spec.kind_name(),
                "square_well": self.well.map(|(a, w)| serde_json::json!({"a": a, "epsilon": w.ln()})),
                "constraints": self.constraints,
            }),
            partition: ExactValue {
                value: z,
                error_estimate: z_err,
            },
            log_partition: z_rel.ln() + fine.log_scale,
            moments,
            pinned_law: None,
            avoidance: Vec::new(),
        })
    }

    fn grid(
        &self,
        site: usize,
        n: usize,
        refine: usize,
        half_width: f64,
        observables: &[Observable],
    ) -> Grid {
        let b = self.lattice.boundary_value();
        let (lo_free, hi_free) = (b.min(0.0) - half_width, b.max(0.0) + half_width);
        let (lo, hi, edges) = match self.constraints[site] {
            SiteConstraint::Free => (lo_free, hi_free, (true, true)),
            SiteConstraint::Window(a) => (-a, a, (false, false)),
            SiteConstraint::AtLeast(l) => (l, hi_free.max(l + half_width), (false, true)),
            SiteConstraint::Fixed(_) => unreachable!("fixed sites are not integrated"),
        };
        let mut cuts = vec![lo, hi];
        if let Some((a, _)) = self.well {
            cuts.extend([-a, a]);
        }
        for o in observables {
            for (i, x) in o.breakpoints() {
                if i == site {
                    cuts.push(x);
                }
            }
        }
        cuts.retain(|&x| x >= lo && x <= hi);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-12 * (1.0 + b.abs()));
        let total = hi - lo;
        let mut nodes = Vec::with_capacity(n + cuts.len());
        let mut weights = Vec::with_capacity(n + cuts.len());
        for w in cuts.windows(2) {
            let (p0, p1) = (w[0], w[1]);
            let len = p1 - p0;
            if len <= 0.0 {
                continue;
            }
            let m = ((n as f64 * len / total).round() as usize).max(1) * refine;
            match self.scheme.rule {
                QuadratureRule::Midpoint => {
                    let h = len / m as f64;
                    for k in 0..m {
                        nodes.push(p0 + (k as f64 + 0.5) * h);
                        weights.push(h);
                    }
                }
                QuadratureRule::GaussLegendre => {
                    for (x, wt) in gauss_legendre(m) {
                        nodes.push(p0 + 0.5 * len * (x + 1.0));
                        weights.push(0.5 * len * wt);
                    }
                }
            }
        }
        let factor: Vec<f64> = nodes
            .iter()
            .map(|&x| match self.well {
                Some((a, ew)) if !matches!(self.constraints[site], SiteConstraint::Window(_)) => {
                    if x.abs() <= a {
                        ew
                    } else {
                        1.0
                    }
                }
                _ => 1.0,
            })
            .collect();
        let len = nodes.len();
        Grid {
            nodes,
            weights,
            factor,
            low_edge: edges.0,
            high_edge: edges.1,
            last: len - 1,
        }
    }

    fn integrate(
        &self,
        observables: &[Observable],
        n: usize,
        refine: usize,
        half_width: f64,
        check_edges: bool,
    ) -> Result<Sums> {
        let integrated = self.integrated();
        let mut level_of = vec![None; self.lattice.len()];
        for (l, &i) in integrated.iter().enumerate() {
            level_of[i] = Some(l);
        }
        let mut base = vec![0.0; self.lattice.len()];
        for (i, c) in self.constraints.iter().enumerate() {
            if let SiteConstraint::Fixed(v) = *c {
                base[i] = v;
            }
        }
        let b = self.lattice.boundary_value();

        // energy of bonds among fixed sites and between fixed sites and the boundary
        let mut constant = 0.0;
        for i in 0..self.lattice.len() {
            if level_of[i].is_some() {
                continue;
            }
            for e in self.couplings.bond_range(i) {
                match self.couplings.bond_partner(e) {
                    None => constant += self.couplings.bond_potential(e).value(base[i] - b),
                    Some(j) if level_of[j].is_none() && j > i => {
                        constant += self.couplings.bond_potential(e).value(base[i] - base[j])
                    }
                    _ => {}
                }
            }
        }

        let grids: Vec<Grid> = integrated
            .iter()
            .map(|&i| self.grid(i, n, refine, half_width, observables))
            .collect();

        // per-level node log-weights and pair tables to earlier levels
        let mut levels = Vec::with_capacity(integrated.len());
        for (l, &i) in integrated.iter().enumerate() {
            let g = &grids[l];
            let mut log_w: Vec<f64> = g
                .nodes
                .iter()
                .zip(&g.weights)
                .zip(&g.factor)
                .map(|((_, w), f)| (w * f).ln())
                .collect();
            let mut pairs = Vec::new();
            for e in self.couplings.bond_range(i) {
                let pot = self.couplings.bond_potential(e);
                let partner = self.couplings.bond_partner(e);
                let fixed_height = match partner {
                    None => Some(b),
                    Some(j) if level_of[j].is_none() => Some(base[j]),
                    _ => None,
                };
                if let Some(c) = fixed_height {
                    for (lw, &x) in log_w.iter_mut().zip(&g.nodes) {
                        *lw -= pot.value(x - c);
                    }
                    continue;
                }
                let j = partner.unwrap();
                let lj = level_of[j].unwrap();
                if lj < l {
                    let gj = &grids[lj];
                    let mut table = Vec::with_capacity(g.nodes.len() * gj.nodes.len());
                    for &x in &g.nodes {
                        for &y in &gj.nodes {
                            table.push(pot.value(x - y));
                        }
                    }
                    pairs.push(PairTable {
                        earlier: lj,
                        stride: gj.nodes.len(),
                        table,
                    });
                }
            }
            levels.push(Level { log_w, pairs });
        }

        let compiled: Vec<Compiled> = observables
            .iter()
            .map(|o| compile(o, &level_of, &base, &grids))
            .collect();

        // shift so that the largest single-node weight is O(1)
        let log_scale: f64 = levels
            .iter()
            .map(|lv| lv.log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .sum::<f64>()
            - constant;

        let ctx = Ctx {
            levels: &levels,
            grids: &grids,
            compiled: &compiled,
            integrated: &integrated,
            shift: levels
                .iter()
                .map(|lv| lv.log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max))
                .sum::<f64>(),
        };

        let mut acc = if integrated.is_empty() {
            let mut a = Acc::new(compiled.len(), 0);
            let mut h = base.clone();
            a.add_leaf(&ctx, 1.0, &[], &mut h);
            a
        } else {
            let parts: Vec<Acc> = (0..grids[0].nodes.len())
                .into_par_iter()
                .map(|m0| {
                    let mut a = Acc::new(compiled.len(), integrated.len());
                    let mut idx = vec![0usize; integrated.len()];
                    let mut h = base.clone();
                    idx[0] = m0;
                    h[integrated[0]] = grids[0].nodes[m0];
                    ctx.descend(1, levels[0].log_w[m0] - ctx.shift, &mut idx, &mut h, &mut a);
                    a
                })
                .collect();
            let mut total = Acc::new(compiled.len(), integrated.len());
            for p in parts {
                total.merge(&p);
            }
            total
        };

        if acc.z <= 0.0 || !acc.z.is_finite() {
            return Err(Error::Solver(format!(
                "quadrature partition function is {} (check the truncation)",
                acc.z
            )));
        }
        if check_edges {
            for (l, &mass) in acc.edge.iter().enumerate() {
                let rel = mass / acc.z;
                if rel > EDGE_MASS_LIMIT {
                    return Err(Error::TruncationTooSmall {
                        half_width,
                        site: integrated[l],
                        mass: rel,
                    });
                }
            }
        }
        acc.edge.clear();
        Ok(Sums {
            z: acc.z,
            sums: acc.sums,
            log_scale,
        })
    }
}

fn rule_name(r: QuadratureRule) -> &'static str {
    match r {
        QuadratureRule::Midpoint => "midpoint",
        QuadratureRule::GaussLegendre => "gauss-legendre",
    }
}

struct Grid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    factor: Vec<f64>,
    low_edge: bool,
    high_edge: bool,
    last: usize,
}

struct PairTable {
    earlier: usize,
    stride: usize,
    table: Vec<f64>,
}

struct Level {
    log_w: Vec<f64>,
    pairs: Vec<PairTable>,
}

enum Term {
    Node(usize, Vec<f64>),
    Const(f64),
}

impl Term {
    #[inline]
    fn at(&self, idx: &[usize]) -> f64 {
        match self {
            Term::Node(l, t) => t[idx[*l]],
            Term::Const(c) => *c,
        }
    }
}

enum Compiled {
    Product(Term, Term),
    Custom(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>),
}

fn compile(o: &Observable, level_of: &[Option<usize>], base: &[f64], grids: &[Grid]) -> Compiled {
    let term = |i: usize, f: &dyn Fn(f64) -> f64| match level_of[i] {
        Some(l) => Term::Node(l, grids[l].nodes.iter().map(|&x| f(x)).collect()),
        None => Term::Const(f(base[i])),
    };
    if let Some((i, f)) = o.single() {
        return Compiled::Product(term(i, &*f), Term::Const(1.0));
    }
    match o {
        Observable::Product(i, j) => Compiled::Product(term(*i, &|x| x), term(*j, &|x| x)),
        Observable::Custom { f, .. } => Compiled::Custom(f.clone()),
        _ => unreachable!(),
    }
}

struct Ctx<'a> {
    levels: &'a [Level],
    grids: &'a [Grid],
    compiled: &'a [Compiled],
    integrated: &'a [usize],
    shift: f64,
}

impl Ctx<'_> {
    fn descend(&self, l: usize, lw: f64, idx: &mut [usize], h: &mut [f64], acc: &mut Acc) {
        if l == self.levels.len() {
            acc.add_leaf(self, lw.exp(), idx, h);
            return;
        }
        let level = &self.levels[l];
        let site = self.integrated[l];
        for m in 0..level.log_w.len() {
            let mut e = level.log_w[m];
            for p in &level.pairs {
                e -= p.table[m * p.stride + idx[p.earlier]];
            }
            idx[l] = m;
            h[site] = self.grids[l].nodes[m];
            self.descend(l + 1, lw + e, idx, h, acc);
        }
    }
}

struct Acc {
    z: f64,
    sums: Vec<f64>,
    edge: Vec<f64>,
}

impl Acc {
    fn new(n_obs: usize, n_levels: usize) -> Self {
        Acc {
            z: 0.0,
            sums: vec![0.0; n_obs],
            edge: vec![0.0; n_levels],
        }
    }

    #[inline]
    fn add_leaf(&mut self, ctx: &Ctx<'_>, w: f64, idx: &[usize], h: &mut [f64]) {
        self.z += w;
        for (s, c) in self.sums.iter_mut().zip(ctx.compiled) {
            *s += w * match c {
                Compiled::Product(a, b) => a.at(idx) * b.at(idx),
                Compiled::Custom(f) => f(h),
            };
        }
        for (l, g) in ctx.grids.iter().enumerate() {
            let m = idx[l];
            if (g.low_edge && m == 0) || (g.high_edge && m == g.last) {
                self.edge[l] += w;
            }
        }
    }

    fn merge(&mut self, o: &Acc) {
        self.z += o.z;
        for (a, b) in self.sums.iter_mut().zip(&o.sums) {
            *a += b;
        }
        for (a, b) in self.edge.iter_mut().zip(&o.edge) {
            *a += b;
        }
    }
}

struct Sums {
    z: f64,
    sums: Vec<f64>,
    log_scale: f64,
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`.
pub fn gauss_legendre(m: usize) -> Vec<(f64, f64)> {
    let mut out = vec![(0.0, 0.0); m];
    for i in 0..m.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 1..=m {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j - 1) as f64 * z * p2 - (j - 1) as f64 * p3) / j as f64;
            }
            pp = m as f64 * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - z * z) * pp * pp);
        out[i] = (-z, w);
        out[m - 1 - i] = (z, w);
    }
    out
}

fn check_pinning(pinning: &PinningSpec, a_set: &PinnedSet) -> Result<Option<(f64, f64)>> {
    match *pinning {
        PinningSpec::Free if a_set.is_empty() => Ok(None),
        PinningSpec::Free => Err(Error::WrongVariant {
            expected: "square-well pinning when A is non-empty",
            found: "free",
        }),
        PinningSpec::SquareWell {
            strength,
            half_width,
        } => Ok(Some((strength, half_width))),
        PinningSpec::Delta { .. } => Err(Error::WrongVariant {
            expected: "free or square-well pinning (use the δ enumeration)",
            found: "delta",
        }),
    }
}

/// Measure behind `Z(A)`: with `A = ∅` and a square well this is `μ^V`;
/// with `A ≠ ∅` it is the unweighted measure restricted to `|h_j| ≤ a` on `A`.
pub fn pinned_set_measure(
    lattice: &Lattice,
    spec: &InteractionSpec,
    pinning: &PinningSpec,
    a_set: &PinnedSet,
    scheme: QuadratureScheme,
) -> Result<ExactMeasure> {
    let well = check_pinning(pinning, a_set)?;
    let m = ExactMeasure::new(lattice, spec, scheme)?;
    Ok(match well {
        None => m,
        Some((eps, a)) if a_set.is_empty() => m.with_square_well(eps, a),
        Some((_, a)) => m.constrain_set(a_set, SiteConstraint::Window(a)),
    })
}

/// `Z^V` when `A` is empty, `Z(A)` of the pinned-set expansion otherwise,
/// `Z⁰` for free pinning.
pub fn quadrature_partition(
    lattice: &Lattice,
    spec: &InteractionSpec,
    pinning: &PinningSpec,
    a_set: &PinnedSet,
    scheme: QuadratureScheme,
) -> Result<ExactValue> {
    Ok(pinned_set_measure(lattice, spec, pinning, a_set, scheme)?
        .evaluate(&[])?
        .partition)
}

pub fn quadrature_moment(
    lattice: &Lattice,
    spec: &InteractionSpec,
    pinning: &PinningSpec,
    a_set: &PinnedSet,
    observable: Observable,
    scheme: QuadratureScheme,
) -> Result<ExactValue> {
    Ok(pinned_set_measure(lattice, spec, pinning, a_set, scheme)?
        .evaluate(&[observable])?
        .moment_at(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_lattice, make_interaction, InteractionKind};
    use std::f64::consts::PI;

    fn unit() -> InteractionSpec {
        make_interaction(InteractionKind::gaussian_nn(0.5)).unwrap()
    }

    fn erf_window(a: f64) -> f64 {
        // ∫_{-a}^{a} e^{-2h²} dh by a fine independent midpoint sum
        let n = 200_000;
        let h = 2.0 * a / n as f64;
        (0..n)
            .map(|k| {
                let x = -a + (k as f64 + 0.5) * h;
                (-2.0 * x * x).exp() * h
            })
            .sum()
    }

    #[test]
    fn single_site_gaussian() {
        let lat = build_lattice(0, 1, 0.0).unwrap();
        let z = quadrature_partition(&lat, &unit(), &PinningSpec::Free, &PinnedSet::empty(1), QuadratureScheme::default())
            .unwrap();
        assert!((z.value - (PI / 2.0).sqrt()).abs() < 1e-10);
        let m = quadrature_moment(
            &lat,
            &unit(),
            &PinningSpec::Free,
            &PinnedSet::empty(1),
            Observable::second_moment(0),
            QuadratureScheme::default(),
        )
        .unwrap();
        assert!((m.value - 0.25).abs() < 1e-10);
        let mean = quadrature_moment(&lat, &unit(), &PinningSpec::Free, &PinnedSet::empty(1), Observable::Mean(0), QuadratureScheme::default()).unwrap();
        assert!(mean.value.abs() < 1e-14);
    }

    #[test]
    fn window_partition() {
        let lat = build_lattice(0, 1, 0.0).unwrap();
        let well = PinningSpec::square_well(0.7, 1.0).unwrap();
        let z = quadrature_partition(&lat, &unit(), &well, &PinnedSet::from_indices(1, &[0]), QuadratureScheme::default())
            .unwrap();
        let want = erf_window(1.0);
        assert!((z.value - want).abs() < 1e-4, "{} vs {}", z.value, want);
        assert!((z.value - want).abs() <= z.error_estimate.max(1e-12));
    }

    #[test]
    fn empty_interior_is_one() {
        let lat = Lattice::from_sites(Vec::new(), 1, 0.0).unwrap();
        let z = quadrature_partition(&lat, &unit(), &PinningSpec::Free, &PinnedSet::empty(0), QuadratureScheme::default())
            .unwrap();
        assert_eq!(z.value, 1.0);
    }

    #[test]
    fn too_many_sites() {
        let lat = build_lattice(2, 1, 0.0).unwrap();
        let r = quadrature_partition(&lat, &unit(), &PinningSpec::Free, &PinnedSet::empty(lat.len()), QuadratureScheme::default());
        assert!(matches!(r, Err(Error::TooLarge { .. })));
    }

    #[test]
    fn truncation_detected() {
        let lat = build_lattice(0, 1, 0.0).unwrap();
        let scheme = QuadratureScheme {
            half_width: Some(0.5),
            ..QuadratureScheme::default()
        };
        let r = quadrature_partition(&lat, &unit(), &PinningSpec::Free, &PinnedSet::empty(1), scheme);
        assert!(matches!(r, Err(Error::TruncationTooSmall { .. })));
    }

    #[test]
    fn gauss_legendre_weights() {
        for m in [2, 5, 16, 40] {
            let r = gauss_legendre(m);
            let s: f64 = r.iter().map(|p| p.1).sum();
            assert!((s - 2.0).abs() < 1e-13);
            let x2: f64 = r.iter().map(|p| p.1 * p.0 * p.0).sum();
            assert!((x2 - 2.0 / 3.0).abs() < 1e-13);
        }
    }

    #[test]
    fn two_site_chain_matches_inverse() {
        let lat = Lattice::chain(2, 1, 0.0).unwrap();
        let m = ExactMeasure::new(&lat, &unit(), QuadratureScheme::default())
            .unwrap()
            .evaluate(&[Observable::second_moment(0), Observable::Product(0, 1)])
            .unwrap();
        assert!((m.moment_at(0).value - 2.0 / 3.0).abs() < 1e-8);
        assert!((m.moment_at(1).value - 1.0 / 3.0).abs() < 1e-8);
    }

    #[test]
    fn fixed_sites_and_boundary_shift() {
        // one free site between a fixed neighbour and the boundary at b
        let lat = Lattice::chain(2, 1, 1.0).unwrap();
        let m = ExactMeasure::new(&lat, &unit(), QuadratureScheme::default())
            .unwrap()
            .constrain(0, SiteConstraint::Fixed(0.0))
            .evaluate(&[Observable::Mean(1), Observable::second_moment(1)])
            .unwrap();
        // h_1 ~ N(1/2, 1/2): energy ½(h)² + ½(h−1)² ... plus the fixed site's boundary bond ½
        assert!((m.moment_at(0).value - 0.5).abs() < 1e-9, "{m:?}");
        assert!((m.moment_at(1).value - 0.75).abs() < 1e-9);
        let want = PI.sqrt() * (-0.25f64).exp() * (-0.5f64).exp();
        assert!((m.partition.value - want).abs() < 1e-9, "{}", m.partition.value);
    }

    #[test]
    fn gauss_legendre_rule_agrees() {
        let lat = Lattice::chain(3, 1, 0.0).unwrap();
        let scheme = QuadratureScheme {
            rule: QuadratureRule::GaussLegendre,
            ..QuadratureScheme::default()
        };
        let r = ExactMeasure::new(&lat, &unit(), scheme)
            .unwrap()
            .evaluate(&[Observable::second_moment(1)])
            .unwrap();
        // (tridiag(2,-1))^{-1}[1][1] = 1 for n = 3
        assert!((r.moment_at(0).value - 1.0).abs() < 1e-10);
    }
}
