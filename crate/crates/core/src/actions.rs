//! Actions of the symmetry group on advected parameters: linear actions on ℝ³,
//! the rotation action on the sphere, advection of densities on the circle, and
//! the affine gauge action on lattice connections. Also the diamond operator,
//! the gauge cocycle with its linearization, and cotangent momentum maps.
//!
//! Parameter values and their duals share one coordinate space; the pairing is
//! the dot product for ℝ³ and S², and Σ v_j a_j Δx on lattices.

use nalgebra::{Matrix3, Vector3};

use crate::algebra::{vee, AlgElem, Algebra, DualElem, GroupElem};
use crate::error::{ensure_finite, EpError, Result};
use crate::lattice::{self, Grid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ActionKind {
    /// No advected parameter (plain EP).
    Trivial,
    LinearR3,
    SphereSo3,
    DensityS1,
    ConnectionGauge,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CocycleKind {
    None,
    GaugeLogDerivative,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActionDescriptor {
    kind: ActionKind,
    algebra: Algebra,
    sigma: f64,
    cocycle: CocycleKind,
}

impl ActionDescriptor {
    pub fn new(kind: ActionKind, algebra: Algebra, sigma: f64, cocycle: CocycleKind) -> Result<Self> {
        let compatible = matches!(
            (kind, &algebra),
            (ActionKind::Trivial, _)
                | (ActionKind::LinearR3 | ActionKind::SphereSo3, Algebra::So3)
                | (ActionKind::DensityS1, Algebra::VectS1(_))
                | (ActionKind::ConnectionGauge, Algebra::GaugeSo3(_))
        );
        if !compatible {
            return Err(EpError::Incompatible(format!("{kind:?} action on {}", algebra.name())));
        }
        if sigma != 1.0 && sigma != -1.0 {
            return Err(EpError::InvalidParameter(format!("orientation must be ±1, got {sigma}")));
        }
        if cocycle == CocycleKind::GaugeLogDerivative && kind != ActionKind::ConnectionGauge {
            return Err(EpError::Incompatible("gauge cocycle requires a connection action".into()));
        }
        Ok(Self { kind, algebra, sigma, cocycle })
    }

    pub fn linear_r3() -> Self {
        Self::new(ActionKind::LinearR3, Algebra::So3, 1.0, CocycleKind::None).unwrap()
    }

    pub fn sphere() -> Self {
        Self::new(ActionKind::SphereSo3, Algebra::So3, 1.0, CocycleKind::None).unwrap()
    }

    pub fn density(grid: Grid) -> Self {
        Self::new(ActionKind::DensityS1, Algebra::VectS1(grid), 1.0, CocycleKind::None).unwrap()
    }

    pub fn connection(grid: Grid) -> Self {
        Self::new(
            ActionKind::ConnectionGauge,
            Algebra::GaugeSo3(grid),
            1.0,
            CocycleKind::GaugeLogDerivative,
        )
        .unwrap()
    }

    pub fn trivial(algebra: Algebra) -> Self {
        Self::new(ActionKind::Trivial, algebra, 1.0, CocycleKind::None).unwrap()
    }

    pub fn kind(&self) -> ActionKind {
        self.kind
    }

    pub fn algebra(&self) -> &Algebra {
        &self.algebra
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn cocycle(&self) -> CocycleKind {
        self.cocycle
    }

    /// Dimension of the parameter space V*.
    pub fn dim(&self) -> usize {
        match self.kind {
            ActionKind::Trivial => 0,
            ActionKind::LinearR3 | ActionKind::SphereSo3 => 3,
            ActionKind::DensityS1 | ActionKind::ConnectionGauge => self.algebra.dim(),
        }
    }

    fn grid(&self) -> Option<Grid> {
        self.algebra.grid()
    }

    /// Pairing between a parameter value (or tangent vector) and a dual parameter.
    pub fn pair(&self, a: &[f64], v: &[f64]) -> f64 {
        match self.grid() {
            Some(g) if self.kind != ActionKind::Trivial => g.pair(a, v),
            _ => a.iter().zip(v).map(|(x, y)| x * y).sum(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdvectedState {
    desc: ActionDescriptor,
    value: Vec<f64>,
}

impl AdvectedState {
    pub fn new(desc: ActionDescriptor, value: Vec<f64>) -> Result<Self> {
        if value.len() != desc.dim() {
            return Err(EpError::Shape(format!(
                "{:?} parameter expects {} values, got {}",
                desc.kind,
                desc.dim(),
                value.len()
            )));
        }
        ensure_finite("advected parameter", &value)?;
        if desc.kind == ActionKind::SphereSo3 {
            let norm = value.iter().map(|v| v * v).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-10 {
                return Err(EpError::InvalidParameter(format!("sphere point has norm {norm}")));
            }
        }
        Ok(Self { desc, value })
    }

    pub(crate) fn new_unchecked(desc: ActionDescriptor, value: Vec<f64>) -> Self {
        Self { desc, value }
    }

    pub fn empty(algebra: Algebra) -> Self {
        Self { desc: ActionDescriptor::trivial(algebra), value: Vec::new() }
    }

    pub fn desc(&self) -> &ActionDescriptor {
        &self.desc
    }

    pub fn value(&self) -> &[f64] {
        &self.value
    }

    pub fn with_value(&self, value: Vec<f64>) -> Self {
        debug_assert_eq!(value.len(), self.value.len());
        Self { desc: self.desc.clone(), value }
    }

    /// Projects a sphere point back to unit norm; identity for other kinds.
    pub fn renormalized(&self) -> Self {
        if self.desc.kind != ActionKind::SphereSo3 {
            return self.clone();
        }
        let norm = self.value.iter().map(|v| v * v).sum::<f64>().sqrt();
        self.with_value(self.value.iter().map(|v| v / norm).collect())
    }

    fn vec3(&self) -> Vector3<f64> {
        Vector3::new(self.value[0], self.value[1], self.value[2])
    }
}

fn v3(s: &[f64]) -> Vector3<f64> {
    Vector3::new(s[0], s[1], s[2])
}

fn check_algebra(desc: &ActionDescriptor, x: &Algebra) -> Result<()> {
    if desc.algebra != *x {
        return Err(EpError::Incompatible(format!(
            "{:?} action on {} cannot take {}",
            desc.kind,
            desc.algebra.name(),
            x.name()
        )));
    }
    Ok(())
}

fn check_dual(desc: &ActionDescriptor, v: &[f64]) -> Result<()> {
    if v.len() != desc.dim() {
        return Err(EpError::Shape(format!("dual parameter has {} values, expected {}", v.len(), desc.dim())));
    }
    Ok(())
}

fn cross_sites(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.chunks_exact(3)
        .zip(b.chunks_exact(3))
        .flat_map(|(p, q)| {
            let c = v3(p).cross(&v3(q));
            [c.x, c.y, c.z]
        })
        .collect()
}

fn rotate_sites(sites: &[Matrix3<f64>], v: &[f64], transpose: bool) -> Vec<f64> {
    sites
        .iter()
        .zip(v.chunks_exact(3))
        .flat_map(|(r, c)| {
            let w = if transpose { r.transpose() * v3(c) } else { r * v3(c) };
            [w.x, w.y, w.z]
        })
        .collect()
}

fn rotate(r: &Matrix3<f64>, v: &[f64], sigma: f64) -> Vec<f64> {
    // σ = −1 realizes ξ·a = −ξ×a, integrated by Rᵀ (a right action).
    let w = if sigma > 0.0 { r * v3(v) } else { r.transpose() * v3(v) };
    vec![w.x, w.y, w.z]
}

/// Group action a ↦ ρ*_g(a) (plus the cocycle for affine descriptors).
pub fn act_group(g: &GroupElem, a: &AdvectedState) -> Result<AdvectedState> {
    let desc = &a.desc;
    let value = match (desc.kind, g) {
        (ActionKind::Trivial, _) => Vec::new(),
        (ActionKind::LinearR3 | ActionKind::SphereSo3, GroupElem::So3(r)) => rotate(r, &a.value, desc.sigma),
        (ActionKind::DensityS1, GroupElem::Rotation { grid, angle }) if Some(*grid) == desc.grid() => {
            lattice::shift(&a.value, *angle)
        }
        (ActionKind::ConnectionGauge, GroupElem::Gauge { grid, sites }) if Some(*grid) == desc.grid() => {
            let mut out = rotate_sites(sites, &a.value, false);
            if desc.cocycle == CocycleKind::GaugeLogDerivative {
                for (o, c) in out.iter_mut().zip(cocycle_values(*grid, sites)) {
                    *o += c;
                }
            }
            out
        }
        _ => return Err(EpError::Incompatible(format!("group element does not act on {:?} parameters", desc.kind))),
    };
    Ok(AdvectedState::new_unchecked(desc.clone(), value))
}

/// ρ_g: the dual linear action, ⟨ρ*_g a, v⟩ = ⟨a, ρ_g v⟩. Cocycles play no role here.
pub fn dual_act(g: &GroupElem, desc: &ActionDescriptor, v: &[f64]) -> Result<Vec<f64>> {
    check_dual(desc, v)?;
    match (desc.kind, g) {
        (ActionKind::Trivial, _) => Ok(Vec::new()),
        (ActionKind::LinearR3 | ActionKind::SphereSo3, GroupElem::So3(r)) => Ok(rotate(r, v, -desc.sigma)),
        (ActionKind::DensityS1, GroupElem::Rotation { grid, angle }) if Some(*grid) == desc.grid() => {
            Ok(lattice::shift(v, -angle))
        }
        (ActionKind::ConnectionGauge, GroupElem::Gauge { grid, sites }) if Some(*grid) == desc.grid() => {
            Ok(rotate_sites(sites, v, true))
        }
        _ => Err(EpError::Incompatible(format!("group element does not act on {:?} parameters", desc.kind))),
    }
}

/// ξa, the linear infinitesimal action (tangent vector at a). For affine descriptors
/// the full advection adds [`dc_eval`]; see [`crate::dynamics::advect_rhs`].
pub fn act_infinitesimal(x: &AlgElem, a: &AdvectedState) -> Result<Vec<f64>> {
    let desc = &a.desc;
    check_algebra(desc, x.algebra())?;
    Ok(match desc.kind {
        ActionKind::Trivial => Vec::new(),
        ActionKind::LinearR3 | ActionKind::SphereSo3 => {
            let w = v3(x.coords()).cross(&a.vec3()) * desc.sigma;
            vec![w.x, w.y, w.z]
        }
        ActionKind::DensityS1 => {
            let h = desc.grid().unwrap().spacing();
            let flux: Vec<f64> = a.value.iter().zip(x.coords()).map(|(r, u)| r * u).collect();
            lattice::diff(&flux, h).into_iter().map(|v| -v).collect()
        }
        ActionKind::ConnectionGauge => cross_sites(x.coords(), &a.value),
    })
}

/// v ⋄ a, defined by ⟨v ⋄ a, ξ⟩ = ⟨ξa, v⟩.
pub fn diamond(v: &[f64], a: &AdvectedState) -> Result<DualElem> {
    let desc = &a.desc;
    check_dual(desc, v)?;
    let coords = match desc.kind {
        ActionKind::Trivial => vec![0.0; desc.algebra.dim()],
        ActionKind::LinearR3 | ActionKind::SphereSo3 => {
            let w = a.vec3().cross(&v3(v)) * desc.sigma;
            vec![w.x, w.y, w.z]
        }
        ActionKind::DensityS1 => {
            let df = lattice::diff(v, desc.grid().unwrap().spacing());
            a.value.iter().zip(df).map(|(r, d)| r * d).collect()
        }
        ActionKind::ConnectionGauge => cross_sites(&a.value, v),
    };
    Ok(DualElem::new_unchecked(desc.algebra.clone(), coords))
}

fn require_cocycle(desc: &ActionDescriptor) -> Result<Grid> {
    match (desc.cocycle, desc.grid()) {
        (CocycleKind::GaugeLogDerivative, Some(g)) => Ok(g),
        _ => Err(EpError::Incompatible(format!("{:?} action carries no cocycle", desc.kind))),
    }
}

fn cocycle_values(grid: Grid, sites: &[Matrix3<f64>]) -> Vec<f64> {
    // D applied entrywise to the matrix field, then c_j = −vee(DR_j R_jᵀ).
    let flat: Vec<f64> = sites.iter().flat_map(|r| r.iter().copied().collect::<Vec<_>>()).collect();
    let d = lattice::diff_strided(&flat, 9, grid.spacing());
    sites
        .iter()
        .zip(d.chunks_exact(9))
        .flat_map(|(r, dr)| {
            let dr = Matrix3::from_column_slice(dr);
            let c = -vee(&(dr * r.transpose()));
            [c.x, c.y, c.z]
        })
        .collect()
}

/// c(g) = −(Dg)g⁻¹ per site.
pub fn cocycle_eval(desc: &ActionDescriptor, g: &GroupElem) -> Result<Vec<f64>> {
    let grid = require_cocycle(desc)?;
    match g {
        GroupElem::Gauge { grid: gg, sites } if *gg == grid => Ok(cocycle_values(grid, sites)),
        _ => Err(EpError::Incompatible("cocycle needs a gauge map on the same lattice".into())),
    }
}

/// dc(ξ) = −Dξ.
pub fn dc_eval(desc: &ActionDescriptor, x: &AlgElem) -> Result<Vec<f64>> {
    let grid = require_cocycle(desc)?;
    check_algebra(desc, x.algebra())?;
    Ok(lattice::diff_strided(x.coords(), 3, grid.spacing()).into_iter().map(|v| -v).collect())
}

/// dc⊤(α) = Dα, the adjoint of [`dc_eval`] under the lattice pairings.
pub fn dc_transpose(desc: &ActionDescriptor, v: &[f64]) -> Result<DualElem> {
    let grid = require_cocycle(desc)?;
    check_dual(desc, v)?;
    Ok(DualElem::new_unchecked(desc.algebra.clone(), lattice::diff_strided(v, 3, grid.spacing())))
}

/// Cotangent momentum map, ⟨J(a, v), ξ⟩ = ⟨v, ξa (+ dc(ξ))⟩.
/// On the sphere this is σ m×p; with a cocycle it is v ⋄ a + dc⊤(v).
pub fn momentum_map(a: &AdvectedState, v: &[f64]) -> Result<DualElem> {
    let base = diamond(v, a)?;
    if a.desc.cocycle == CocycleKind::GaugeLogDerivative {
        return Ok(base.add(&dc_transpose(&a.desc, v)?));
    }
    Ok(base)
}
