//! Pair potentials and the validated finite-range interaction family.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A lattice displacement `k ∈ ℤ²`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Offset(pub i32, pub i32);

impl Offset {
    pub fn sup_norm(self) -> i32 {
        self.0.abs().max(self.1.abs())
    }

    pub fn l1_norm(self) -> i32 {
        self.0.abs() + self.1.abs()
    }

    pub fn neg(self) -> Offset {
        Offset(-self.0, -self.1)
    }

    /// True for exactly one of `k`, `-k`; used to count each unordered bond once.
    pub fn is_forward(self) -> bool {
        self.0 > 0 || (self.0 == 0 && self.1 > 0)
    }

    pub fn nearest_neighbors() -> Vec<Offset> {
        vec![Offset(1, 0), Offset(-1, 0), Offset(0, 1), Offset(0, -1)]
    }

    /// Every offset with `0 < ‖k‖∞ ≤ range`.
    pub fn square(range: i32) -> Vec<Offset> {
        let mut out = Vec::new();
        for dx in -range..=range {
            for dy in -range..=range {
                if dx != 0 || dy != 0 {
                    out.push(Offset(dx, dy));
                }
            }
        }
        out
    }
}

impl fmt::Display for Offset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.0, self.1)
    }
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A user-supplied potential given as the triple `(Ψ, Ψ', Ψ'')`.
#[derive(Clone)]
pub struct CustomPotential {
    pub value: ScalarFn,
    pub first: ScalarFn,
    pub second: ScalarFn,
}

impl CustomPotential {
    pub fn new(
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        first: impl Fn(f64) -> f64 + Send + Sync + 'static,
        second: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        CustomPotential {
            value: Arc::new(value),
            first: Arc::new(first),
            second: Arc::new(second),
        }
    }
}

impl fmt::Debug for CustomPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CustomPotential")
    }
}

/// One pair potential `Ψ_k`.
#[derive(Clone, Debug)]
pub enum Potential {
    /// `Ψ(x) = coef · x²`.
    Quadratic { coef: f64 },
    /// `Ψ(x) = κx²/2 + λx⁴/12`.
    Quartic { kappa: f64, lambda: f64 },
    /// `Ψ(x) = κ(cosh x − 1)`; unbounded second derivative.
    Cosh { kappa: f64 },
    Custom(CustomPotential),
}

impl Potential {
    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        match self {
            Potential::Quadratic { coef } => coef * x * x,
            Potential::Quartic { kappa, lambda } => {
                let x2 = x * x;
                0.5 * kappa * x2 + lambda * x2 * x2 / 12.0
            }
            Potential::Cosh { kappa } => kappa * (x.cosh() - 1.0),
            Potential::Custom(c) => (c.value)(x),
        }
    }

    #[inline]
    pub fn first(&self, x: f64) -> f64 {
        match self {
            Potential::Quadratic { coef } => 2.0 * coef * x,
            Potential::Quartic { kappa, lambda } => kappa * x + lambda * x * x * x / 3.0,
            Potential::Cosh { kappa } => kappa * x.sinh(),
            Potential::Custom(c) => (c.first)(x),
        }
    }

    #[inline]
    pub fn second(&self, x: f64) -> f64 {
        match self {
            Potential::Quadratic { coef } => 2.0 * coef,
            Potential::Quartic { kappa, lambda } => kappa + lambda * x * x,
            Potential::Cosh { kappa } => kappa * x.cosh(),
            Potential::Custom(c) => (c.second)(x),
        }
    }

    /// Analytic `inf Ψ''` for the built-in kinds.
    fn builtin_floor(&self) -> Option<f64> {
        match self {
            Potential::Quadratic { coef } => Some(2.0 * coef),
            Potential::Quartic { kappa, .. } => Some(*kappa),
            Potential::Cosh { kappa } => Some(*kappa),
            Potential::Custom(_) => None,
        }
    }

    /// Analytic `sup Ψ''` for the built-in kinds (`None` when unbounded).
    fn builtin_ceiling(&self) -> Option<f64> {
        match self {
            Potential::Quadratic { coef } => Some(2.0 * coef),
            Potential::Quartic { kappa, lambda } if *lambda == 0.0 => Some(*kappa),
            _ => None,
        }
    }

    /// Lower bound on `Ψ''`: analytic for built-ins, sampled on the validation
    /// grid for custom potentials.
    pub fn curvature_floor(&self) -> f64 {
        self.builtin_floor().unwrap_or_else(|| {
            let n = (2.0 * VALIDATION_HALF_WIDTH / VALIDATION_STEP) as i64;
            (0..=n)
                .map(|k| self.second(-VALIDATION_HALF_WIDTH + k as f64 * VALIDATION_STEP))
                .fold(f64::INFINITY, f64::min)
                .max(0.0)
        })
    }

    pub fn is_quadratic(&self) -> bool {
        matches!(self, Potential::Quadratic { .. })
            || matches!(self, Potential::Quartic { lambda, .. } if *lambda == 0.0)
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Potential::Quadratic { .. } => "quadratic",
            Potential::Quartic { .. } => "quartic",
            Potential::Cosh { .. } => "cosh",
            Potential::Custom(_) => "custom",
        }
    }
}

/// Requested interaction family, before validation.
#[derive(Clone, Debug)]
pub enum InteractionKind {
    /// `Ψ_k(x) = c_k x²` for each listed `(k, c_k)`.
    Gaussian { couplings: Vec<(Offset, f64)> },
    Quartic {
        kappa: f64,
        lambda: f64,
        offsets: Vec<Offset>,
    },
    Cosh { kappa: f64, offsets: Vec<Offset> },
    Custom {
        terms: Vec<(Offset, CustomPotential)>,
        floor: f64,
        ceiling: Option<f64>,
    },
}

impl InteractionKind {
    /// Nearest-neighbour Gaussian with a common coefficient, `Ψ(x) = coef·x²`.
    pub fn gaussian_nn(coef: f64) -> Self {
        InteractionKind::Gaussian {
            couplings: Offset::nearest_neighbors()
                .into_iter()
                .map(|k| (k, coef))
                .collect(),
        }
    }

    pub fn quartic_nn(kappa: f64, lambda: f64) -> Self {
        InteractionKind::Quartic {
            kappa,
            lambda,
            offsets: Offset::nearest_neighbors(),
        }
    }
}

/// Validated interaction family `{Ψ_k}`.
#[derive(Clone, Debug)]
pub struct InteractionSpec {
    range: i32,
    offsets: Vec<Offset>,
    potentials: Vec<Potential>,
    floor: f64,
    ceiling: Option<f64>,
    irreducible: Vec<bool>,
}

/// Invariants are checked on `[-20, 20]` with step 1/64.
pub const VALIDATION_HALF_WIDTH: f64 = 20.0;
pub const VALIDATION_STEP: f64 = 1.0 / 64.0;
const FD_STEP: f64 = 1e-4;
const FD_TOLERANCE: f64 = 1e-6;

fn validation_grid() -> impl Iterator<Item = f64> {
    let n = (2.0 * VALIDATION_HALF_WIDTH / VALIDATION_STEP).round() as i64;
    (0..=n).map(|i| -VALIDATION_HALF_WIDTH + i as f64 * VALIDATION_STEP)
}

/// Builds and validates an interaction family.
pub fn make_interaction(kind: InteractionKind) -> Result<InteractionSpec> {
    let (terms, claimed_floor, claimed_ceiling): (Vec<(Offset, Potential)>, Option<f64>, Option<f64>) =
        match kind {
            InteractionKind::Gaussian { couplings } => {
                for (k, c) in &couplings {
                    if !(*c > 0.0) || !c.is_finite() {
                        return Err(Error::InvalidInteraction(format!(
                            "gaussian coefficient for offset {k} must be positive, got {c}"
                        )));
                    }
                }
                let t = couplings
                    .into_iter()
                    .map(|(k, c)| (k, Potential::Quadratic { coef: c }))
                    .collect();
                (t, None, None)
            }
            InteractionKind::Quartic {
                kappa,
                lambda,
                offsets,
            } => {
                if !(kappa > 0.0) || !(lambda >= 0.0) {
                    return Err(Error::InvalidInteraction(format!(
                        "quartic needs kappa > 0 and lambda >= 0, got kappa={kappa}, lambda={lambda}"
                    )));
                }
                let t = offsets
                    .into_iter()
                    .map(|k| (k, Potential::Quartic { kappa, lambda }))
                    .collect();
                (t, None, None)
            }
            InteractionKind::Cosh { kappa, offsets } => {
                if !(kappa > 0.0) {
                    return Err(Error::InvalidInteraction(format!(
                        "cosh needs kappa > 0, got {kappa}"
                    )));
                }
                let t = offsets
                    .into_iter()
                    .map(|k| (k, Potential::Cosh { kappa }))
                    .collect();
                (t, None, None)
            }
            InteractionKind::Custom {
                terms,
                floor,
                ceiling,
            } => {
                let t = terms
                    .into_iter()
                    .map(|(k, c)| (k, Potential::Custom(c)))
                    .collect();
                (t, Some(floor), ceiling)
            }
        };
    InteractionSpec::validate(terms, claimed_floor, claimed_ceiling)
}

impl InteractionSpec {
    fn validate(
        terms: Vec<(Offset, Potential)>,
        claimed_floor: Option<f64>,
        claimed_ceiling: Option<f64>,
    ) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidInteraction("no offsets given".into()));
        }
        let mut offsets = Vec::with_capacity(terms.len());
        let mut potentials = Vec::with_capacity(terms.len());
        for (k, p) in terms {
            if k.sup_norm() == 0 {
                return Err(Error::InvalidInteraction("offset (0,0) is not allowed".into()));
            }
            if offsets.contains(&k) {
                return Err(Error::InvalidInteraction(format!("offset {k} listed twice")));
            }
            offsets.push(k);
            potentials.push(p);
        }
        let range = offsets.iter().map(|k| k.sup_norm()).max().unwrap_or(1);

        // Ψ_k = Ψ_{-k}
        for (idx, k) in offsets.iter().enumerate() {
            let Some(jdx) = offsets.iter().position(|q| *q == k.neg()) else {
                return Err(Error::InvalidInteraction(format!(
                    "offset {k} present but {} missing (Ψ_k = Ψ_-k required)",
                    k.neg()
                )));
            };
            for x in validation_grid() {
                let a = potentials[idx].value(x);
                let b = potentials[jdx].value(x);
                if (a - b).abs() > 1e-12 * (1.0 + a.abs()) {
                    return Err(Error::InvalidInteraction(format!(
                        "Ψ_{k} and Ψ_{} differ at x = {x}",
                        k.neg()
                    )));
                }
            }
        }

        for (k, p) in offsets.iter().zip(&potentials) {
            check_potential(*k, p)?;
        }

        let floor = match claimed_floor {
            Some(c) => c,
            None => potentials
                .iter()
                .filter_map(|p| p.builtin_floor())
                .fold(f64::INFINITY, f64::min),
        };
        if !(floor > 0.0) || !floor.is_finite() {
            return Err(Error::InvalidInteraction(format!(
                "ellipticity floor must be positive, got {floor}"
            )));
        }
        let ceiling = match claimed_floor {
            Some(_) => claimed_ceiling,
            None => potentials
                .iter()
                .map(|p| p.builtin_ceiling())
                .try_fold(0.0f64, |acc, c| c.map(|c| acc.max(c))),
        };
        if let Some(ceil) = ceiling {
            for (k, p) in offsets.iter().zip(&potentials) {
                if let Some(x) = validation_grid().find(|&x| p.second(x) > ceil * (1.0 + 1e-12)) {
                    return Err(Error::InvalidInteraction(format!(
                        "Ψ''_{k}({x}) exceeds the claimed ceiling {ceil}"
                    )));
                }
            }
        }

        let irreducible: Vec<bool> = potentials
            .iter()
            .map(|p| validation_grid().all(|x| p.second(x) >= floor * (1.0 - 1e-12)))
            .collect();
        let family: Vec<Offset> = offsets
            .iter()
            .zip(&irreducible)
            .filter(|(_, &ok)| ok)
            .map(|(k, _)| *k)
            .collect();
        if !generates_z2(&family) {
            return Err(Error::InvalidInteraction(format!(
                "offsets with Ψ'' >= {floor} do not generate Z^2: {family:?}"
            )));
        }

        Ok(InteractionSpec {
            range,
            offsets,
            potentials,
            floor,
            ceiling,
            irreducible,
        })
    }

    pub fn range(&self) -> i32 {
        self.range
    }

    pub fn offsets(&self) -> &[Offset] {
        &self.offsets
    }

    pub fn potentials(&self) -> &[Potential] {
        &self.potentials
    }

    pub fn potential(&self, k: Offset) -> Option<&Potential> {
        self.offsets
            .iter()
            .position(|q| *q == k)
            .map(|i| &self.potentials[i])
    }

    /// The ellipticity floor `c`.
    pub fn floor(&self) -> f64 {
        self.floor
    }

    /// `sup_k sup_x Ψ_k''(x)` when bounded.
    pub fn ceiling(&self) -> Option<f64> {
        self.ceiling
    }

    /// Offsets whose second derivative never drops below the floor.
    pub fn irreducible_offsets(&self) -> Vec<Offset> {
        self.offsets
            .iter()
            .zip(&self.irreducible)
            .filter(|(_, &ok)| ok)
            .map(|(k, _)| *k)
            .collect()
    }

    /// True when every `Ψ_k` is an exact quadratic.
    pub fn is_gaussian(&self) -> bool {
        self.potentials.iter().all(Potential::is_quadratic)
    }

    pub fn kind_name(&self) -> &'static str {
        if self.is_gaussian() {
            "gaussian"
        } else {
            self.potentials[0].kind_name()
        }
    }

    /// Constant curvature `Ψ_k''` per offset for Gaussian families.
    pub fn gaussian_curvatures(&self) -> Option<Vec<(Offset, f64)>> {
        if !self.is_gaussian() {
            return None;
        }
        Some(
            self.offsets
                .iter()
                .zip(&self.potentials)
                .map(|(k, p)| (*k, p.second(0.0)))
                .collect(),
        )
    }

    /// The comparison Gaussian family: `Ψ(x) = x²/2` on the irreducible offsets.
    pub fn comparison_gaussian(&self) -> InteractionSpec {
        let offsets = self.irreducible_offsets();
        let potentials = offsets
            .iter()
            .map(|_| Potential::Quadratic { coef: 0.5 })
            .collect::<Vec<_>>();
        let irreducible = vec![true; offsets.len()];
        InteractionSpec {
            range: offsets.iter().map(|k| k.sup_norm()).max().unwrap_or(1),
            offsets,
            potentials,
            floor: 1.0,
            ceiling: Some(1.0),
            irreducible,
        }
    }
}

fn check_potential(k: Offset, p: &Potential) -> Result<()> {
    for x in validation_grid() {
        let v = p.value(x);
        let d1 = p.first(x);
        let d2 = p.second(x);
        if !(v.is_finite() && d1.is_finite() && d2.is_finite()) {
            return Err(Error::InvalidInteraction(format!(
                "Ψ_{k} is not finite at x = {x}"
            )));
        }
        let vm = p.value(-x);
        if (v - vm).abs() > 1e-9 * (1.0 + v.abs()) {
            return Err(Error::InvalidInteraction(format!(
                "Ψ_{k} is not even: Ψ({x}) = {v}, Ψ({}) = {vm}",
                -x
            )));
        }
        if d2 < -1e-12 {
            return Err(Error::InvalidInteraction(format!(
                "Ψ_{k} is not convex: Ψ''({x}) = {d2}"
            )));
        }
        let fd1 = (p.value(x + FD_STEP) - p.value(x - FD_STEP)) / (2.0 * FD_STEP);
        if (fd1 - d1).abs() > FD_TOLERANCE * (1.0 + d1.abs()) {
            return Err(Error::InvalidInteraction(format!(
                "Ψ'_{k}({x}) = {d1} disagrees with finite difference {fd1}"
            )));
        }
        let fd2 = (p.first(x + FD_STEP) - p.first(x - FD_STEP)) / (2.0 * FD_STEP);
        if (fd2 - d2).abs() > FD_TOLERANCE * (1.0 + d2.abs()) {
            return Err(Error::InvalidInteraction(format!(
                "Ψ''_{k}({x}) = {d2} disagrees with finite difference {fd2}"
            )));
        }
    }
    Ok(())
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// A set of integer vectors generates ℤ² iff the gcd of all 2×2 minors is 1.
pub fn generates_z2(vectors: &[Offset]) -> bool {
    let mut g = 0i64;
    for (i, u) in vectors.iter().enumerate() {
        for v in &vectors[i + 1..] {
            let det = u.0 as i64 * v.1 as i64 - u.1 as i64 * v.0 as i64;
            g = gcd(g, det);
        }
    }
    g == 1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_half_gives_unit_floor() {
        let spec = make_interaction(InteractionKind::gaussian_nn(0.5)).unwrap();
        assert_eq!(spec.range(), 1);
        assert_eq!(spec.floor(), 1.0);
        assert_eq!(spec.ceiling(), Some(1.0));
        assert!(spec.is_gaussian());
        assert_eq!(spec.irreducible_offsets().len(), 4);
    }

    #[test]
    fn quartic_without_lambda_is_gaussian() {
        let q = make_interaction(InteractionKind::quartic_nn(1.0, 0.0)).unwrap();
        let g = make_interaction(InteractionKind::gaussian_nn(0.5)).unwrap();
        assert!(q.is_gaussian());
        assert_eq!(q.floor(), g.floor());
        for x in [-3.0, -0.2, 0.0, 1.7] {
            assert_eq!(q.potentials()[0].value(x), g.potentials()[0].value(x));
        }
    }

    #[test]
    fn odd_custom_potential_rejected() {
        let cube = CustomPotential::new(|x| x * x * x, |x| 3.0 * x * x, |x| 6.0 * x);
        let terms = Offset::nearest_neighbors()
            .into_iter()
            .map(|k| (k, cube.clone()))
            .collect();
        let err = make_interaction(InteractionKind::Custom {
            terms,
            floor: 1.0,
            ceiling: None,
        })
        .unwrap_err();
        assert!(err.to_string().contains("not even"), "{err}");
    }

    #[test]
    fn wrong_derivative_rejected() {
        let bad = CustomPotential::new(|x| x * x, |x| x, |_| 2.0);
        let terms = Offset::nearest_neighbors()
            .into_iter()
            .map(|k| (k, bad.clone()))
            .collect();
        assert!(make_interaction(InteractionKind::Custom {
            terms,
            floor: 1.0,
            ceiling: None
        })
        .is_err());
    }

    #[test]
    fn non_convex_rejected() {
        let dw = CustomPotential::new(
            |x| x.powi(4) - x * x,
            |x| 4.0 * x.powi(3) - 2.0 * x,
            |x| 12.0 * x * x - 2.0,
        );
        let terms = Offset::nearest_neighbors()
            .into_iter()
            .map(|k| (k, dw.clone()))
            .collect();
        let err = make_interaction(InteractionKind::Custom {
            terms,
            floor: 0.5,
            ceiling: None,
        })
        .unwrap_err();
        assert!(err.to_string().contains("convex"), "{err}");
    }

    #[test]
    fn disconnected_family_rejected() {
        // Only horizontal bonds: generates ℤ × {0}.
        let err = make_interaction(InteractionKind::Gaussian {
            couplings: vec![(Offset(1, 0), 0.5), (Offset(-1, 0), 0.5)],
        })
        .unwrap_err();
        assert!(err.to_string().contains("generate"), "{err}");
        // Diagonals only: index-2 sublattice.
        let err = make_interaction(InteractionKind::Gaussian {
            couplings: vec![
                (Offset(1, 1), 0.5),
                (Offset(-1, -1), 0.5),
                (Offset(1, -1), 0.5),
                (Offset(-1, 1), 0.5),
            ],
        })
        .unwrap_err();
        assert!(err.to_string().contains("generate"));
    }

    #[test]
    fn asymmetric_offsets_rejected() {
        let err = make_interaction(InteractionKind::Gaussian {
            couplings: vec![
                (Offset(1, 0), 0.5),
                (Offset(-1, 0), 0.5),
                (Offset(0, 1), 0.5),
                (Offset(0, -1), 0.7),
            ],
        })
        .unwrap_err();
        assert!(err.to_string().contains("differ"));
    }

    #[test]
    fn nonpositive_floor_rejected() {
        let flat = CustomPotential::new(|x| x * x, |x| 2.0 * x, |_| 2.0);
        let terms = Offset::nearest_neighbors()
            .into_iter()
            .map(|k| (k, flat.clone()))
            .collect();
        assert!(make_interaction(InteractionKind::Custom {
            terms,
            floor: 0.0,
            ceiling: None
        })
        .is_err());
        assert!(make_interaction(InteractionKind::gaussian_nn(0.0)).is_err());
    }

    #[test]
    fn cosh_has_no_ceiling() {
        let s = make_interaction(InteractionKind::Cosh {
            kappa: 0.5,
            offsets: Offset::nearest_neighbors(),
        })
        .unwrap();
        assert_eq!(s.floor(), 0.5);
        assert_eq!(s.ceiling(), None);
        assert!(!s.is_gaussian());
    }

    #[test]
    fn range_two_family() {
        let s = make_interaction(InteractionKind::Gaussian {
            couplings: Offset::square(2).into_iter().map(|k| (k, 0.1)).collect(),
        })
        .unwrap();
        assert_eq!(s.range(), 2);
        assert_eq!(s.offsets().len(), 24);
        assert!((s.floor() - 0.2).abs() < 1e-15);
    }
}
