//! Transfer operators `L_z f = L₀(f e^{zu})` assembled as nodal matrices,
//! window composition, Birkhoff sums and the Lasota-Yorke verifier.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::function::DiscreteFunction;
use crate::grid::{Grid, GridKind, Point};
use crate::sparse::CsrMatrix;
use crate::systems::{SystemStage, CoveringMeta};
use crate::C64;

/// Real potential `u` of one stage.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Potential {
    Constant(f64),
    /// `Σ c_k x^k` on interval points.
    Polynomial(Vec<f64>),
    /// `coeff · ln x` on interval points.
    Log { coeff: f64 },
    /// Value indexed by the first symbol (the column on towers).
    Symbol(Vec<f64>),
    /// Value indexed by the tower level.
    Level(Vec<f64>),
    /// Node values, interpolated on interval grids.
    Nodal(Vec<f64>),
}

impl Potential {
    pub fn zero() -> Self {
        Potential::Constant(0.0)
    }

    /// Coefficient of `ln x` in the singular part at 0.
    pub fn log_coeff(&self) -> f64 {
        match self {
            Potential::Log { coeff } => *coeff,
            _ => 0.0,
        }
    }

    /// `u(p)` without the `ln x` part.
    pub fn regular_value(&self, p: &Point, grid: &Grid) -> Result<f64> {
        match (self, p) {
            (Potential::Log { .. }, _) => Ok(0.0),
            _ => self.value(p, grid),
        }
    }

    pub fn value(&self, p: &Point, grid: &Grid) -> Result<f64> {
        match (self, p) {
            (Potential::Constant(c), _) => Ok(*c),
            (Potential::Polynomial(cs), Point::Real(x)) => Ok(cs.iter().rev().fold(0.0, |acc, c| acc * x + c)),
            (Potential::Log { coeff }, Point::Real(x)) => {
                if *x > 0.0 {
                    Ok(coeff * libm::log(*x))
                } else {
                    bail!(Domain, "log potential at x = {x}")
                }
            }
            (Potential::Symbol(v), Point::Word(w)) | (Potential::Symbol(v), Point::Tower { word: w, .. }) => {
                match w.first().and_then(|&a| v.get(a)) {
                    Some(x) => Ok(*x),
                    None => bail!(Domain, "no symbol value for word {w:?}"),
                }
            }
            (Potential::Level(v), Point::Tower { level, .. }) => match v.get(*level) {
                Some(x) => Ok(*x),
                None => bail!(Domain, "no value for level {level}"),
            },
            (Potential::Nodal(v), Point::Real(x)) => {
                if v.len() != grid.len() {
                    bail!(Type, "nodal potential has {} values for {} nodes", v.len(), grid.len());
                }
                let mut row = Vec::new();
                grid.interval_row(*x, &mut row)?;
                Ok(row.iter().map(|&(k, w)| w * v[k]).sum())
            }
            (Potential::Nodal(v), _) => {
                if v.len() != grid.len() {
                    bail!(Type, "nodal potential has {} values for {} nodes", v.len(), grid.len());
                }
                Ok(v[grid.locate(p)?])
            }
            _ => bail!(Type, "potential {self:?} cannot be evaluated at {p:?}"),
        }
    }

    /// Sup over the grid nodes (`+∞` for a log singularity).
    pub fn sup_norm(&self, grid: &Grid) -> Result<f64> {
        if self.log_coeff() != 0.0 {
            return Ok(f64::INFINITY);
        }
        let mut s = 0.0f64;
        for i in 0..grid.len() {
            s = s.max(libm::fabs(self.value(&grid.node_point(i), grid)?));
        }
        Ok(s)
    }

    pub fn nodal_values(&self, grid: &Grid) -> Result<Vec<f64>> {
        (0..grid.len()).map(|i| self.value(&grid.node_point(i), grid)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Mode {
    /// `L₀`
    Plain,
    /// `L f = L₀(f v) / v` on a tower.
    Weighted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferStage {
    pub stage: SystemStage,
    pub grid: Arc<Grid>,
    pub mode: Mode,
    pub truncation: usize,
    /// Largest acceptable raw tail bound per application.
    pub tail_budget: f64,
}

/// Nodal matrix of one twisted stage plus its truncation tail.
#[derive(Debug, Clone, PartialEq)]
pub struct AssembledOperator {
    pub matrix: CsrMatrix,
    pub grid: Arc<Grid>,
    /// `|omitted part of (L_z f)(x)| ≤ tail · ‖f‖∞` before any correction.
    pub tail: f64,
    pub tail_corrected: bool,
}

/// Output of an operator application with its truncation ledger.
#[derive(Debug, Clone, PartialEq)]
pub struct Applied {
    pub function: DiscreteFunction,
    /// Accumulated `tail · ‖input‖∞` over the applied stages.
    pub tail: f64,
}

impl AssembledOperator {
    pub fn apply(&self, f: &DiscreteFunction) -> Result<Applied> {
        if !(Arc::ptr_eq(&self.grid, &f.grid) || *self.grid == *f.grid) {
            bail!(Type, "function grid does not match the operator grid");
        }
        let values = self.matrix.apply(&f.values);
        Ok(Applied { tail: self.tail * f.sup_norm(), function: DiscreteFunction { grid: self.grid.clone(), values } })
    }

    pub fn apply_values(&self, v: &[C64]) -> Vec<C64> {
        self.matrix.apply(v)
    }

    /// Action on covectors: `(L*ν)(g) = ν(Lg)`.
    pub fn apply_adjoint(&self, nu: &[C64]) -> Vec<C64> {
        self.matrix.apply_transpose(nu)
    }
}

impl TransferStage {
    pub fn new(stage: SystemStage, grid: Arc<Grid>, mode: Mode, truncation: usize) -> Result<Self> {
        match (&stage, grid.kind()) {
            (SystemStage::Gauss | SystemStage::Interval(_), GridKind::Interval(_)) => {}
            (SystemStage::FullShift(s), GridKind::Cylinder(c)) => {
                if let Some(k) = s.weights.finite_len() {
                    if k != c.alphabet {
                        bail!(Type, "{k} symbol weights on a grid with {} symbols", c.alphabet);
                    }
                }
            }
            (SystemStage::Tower(t), GridKind::Tower(l)) => {
                if t.spec.return_times != l.return_times || t.spec.k_depth != l.depth {
                    bail!(Type, "tower grid does not match the tower stage");
                }
            }
            _ => bail!(Type, "a {} stage cannot act on a {} grid", stage.name(), grid.describe()),
        }
        if mode == Mode::Weighted && !matches!(stage, SystemStage::Tower(_)) {
            bail!(Type, "weighted mode needs a tower stage");
        }
        let truncation = match (&stage, grid.kind()) {
            (SystemStage::FullShift(_), GridKind::Cylinder(c)) => c.alphabet,
            _ => truncation.max(1),
        };
        Ok(TransferStage { stage, grid, mode, truncation, tail_budget: 1e-2 })
    }

    pub fn with_tail_budget(mut self, budget: f64) -> Self {
        self.tail_budget = budget;
        self
    }

    pub fn covering(&self) -> Option<CoveringMeta> {
        self.stage.covering()
    }

    /// Matrix of `f ↦ L₀(f e^{zu})` (or its weighted version) on the grid.
    pub fn assemble(&self, u: &Potential, z: C64) -> Result<AssembledOperator> {
        if !z.re.is_finite() || !z.im.is_finite() {
            bail!(NonFinite, "twist parameter {z}");
        }
        let n = self.grid.len();
        let grid = &*self.grid;
        match &self.stage {
            SystemStage::Gauss => self.assemble_gauss(u, z),
            SystemStage::Interval(m) => {
                let mut rows = Vec::with_capacity(n);
                let mut buf = Vec::new();
                let iv = grid.interval().unwrap();
                for &x in &iv.nodes {
                    let mut row = vec![C64::new(0.0, 0.0); n];
                    for br in m.branches(x)?.branches {
                        let y = br.preimage.as_real().unwrap();
                        let w = (C64::new(br.log_weight, 0.0) + z * u.value(&br.preimage, grid)?).exp();
                        grid.interval_row(y, &mut buf)?;
                        for &(k, c) in &buf {
                            row[k] += w * c;
                        }
                    }
                    rows.push(row);
                }
                Ok(AssembledOperator {
                    matrix: CsrMatrix::from_dense_rows(n, rows),
                    grid: self.grid.clone(),
                    tail: 0.0,
                    tail_corrected: false,
                })
            }
            SystemStage::FullShift(_) | SystemStage::Tower(_) => {
                let mut rows = Vec::with_capacity(n);
                let mut tail = 0.0f64;
                let level_w = grid.tower_layout().map(|t| t.level_weight.clone());
                for i in 0..n {
                    let x = grid.node_point(i);
                    let bs = self.stage.branches(&x, self.truncation)?;
                    tail = tail.max(bs.tail_bound);
                    let mut row = Vec::with_capacity(bs.branches.len());
                    for br in &bs.branches {
                        let k = grid.locate(&br.preimage)?;
                        let mut w = (C64::new(br.log_weight, 0.0) + z * u.value(&br.preimage, grid)?).exp();
                        if self.mode == Mode::Weighted {
                            let lv = level_w.as_ref().unwrap();
                            let lk = grid.tower_layout().unwrap().level(k);
                            let li = grid.tower_layout().unwrap().level(i);
                            w *= lv[lk] / lv[li];
                        }
                        row.push((k, w));
                    }
                    rows.push(row);
                }
                if tail > 0.0 {
                    tail *= libm::exp(libm::fabs(z.re) * u.sup_norm(grid)?);
                }
                if tail > self.tail_budget {
                    return Err(crate::Error::Truncation { tail, budget: self.tail_budget });
                }
                Ok(AssembledOperator { matrix: CsrMatrix::from_rows(n, rows), grid: self.grid.clone(), tail, tail_corrected: false })
            }
        }
    }

    /// Gauss branches `y_n = 1/(x+n)`, `n ≤ N`, with the remaining sum
    /// replaced by `∫_0^{y*} y^β Φ(y) dy`, `y* = 1/(x+N+½)`, and `Φ` linear
    /// between 0 and `y*`.
    fn assemble_gauss(&self, u: &Potential, z: C64) -> Result<AssembledOperator> {
        let grid = &*self.grid;
        let n = grid.len();
        let nn = self.truncation;
        let c = u.log_coeff();
        let beta = z * c;
        let sigma = 2.0 + beta.re;
        if sigma <= 1.0 {
            bail!(NotSummable, "Gauss branch weights |y|^{sigma} are not summable");
        }
        let reg_sup = if c != 0.0 { 0.0 } else { u.sup_norm(grid)? };
        let tail = libm::pow(nn as f64, 1.0 - sigma) / (sigma - 1.0) * libm::exp(libm::fabs(z.re) * reg_sup);
        if tail > self.tail_budget {
            return Err(crate::Error::Truncation { tail, budget: self.tail_budget });
        }
        let iv = grid.interval().unwrap();
        let plain = z == C64::new(0.0, 0.0);
        let mut rows = Vec::with_capacity(n);
        let mut buf = Vec::with_capacity(n);
        let reg = |y: f64| -> Result<f64> {
            if plain {
                Ok(0.0)
            } else {
                u.regular_value(&Point::Real(y), grid)
            }
        };
        for &x in &iv.nodes {
            let mut row = vec![C64::new(0.0, 0.0); n];
            for k in 1..=nn {
                let d = x + k as f64;
                let y = 1.0 / d;
                let w = if plain {
                    C64::new(1.0 / (d * d), 0.0)
                } else {
                    (-(2.0 + beta) * libm::log(d) + z * reg(y)?).exp()
                };
                grid.accumulate_row(y, w, &mut row, &mut buf)?;
            }
            let ys = 1.0 / (x + nn as f64 + 0.5);
            let p1 = ((1.0 + beta) * libm::log(ys)).exp();
            let at0 = p1 * (1.0 / (1.0 + beta) - 1.0 / (2.0 + beta)) * (z * reg(0.0)?).exp();
            let at_ys = p1 / (2.0 + beta) * (z * reg(ys)?).exp();
            grid.interval_row(0.0, &mut buf)?;
            for &(m, cf) in &buf {
                row[m] += at0 * cf;
            }
            grid.interval_row(ys, &mut buf)?;
            for &(m, cf) in &buf {
                row[m] += at_ys * cf;
            }
            rows.push(row);
        }
        Ok(AssembledOperator { matrix: CsrMatrix::from_dense_rows(n, rows), grid: self.grid.clone(), tail, tail_corrected: true })
    }
}

/// `L₀ f` (or `L f` in weighted mode) with its tail report.
pub fn apply_l0(op: &TransferStage, f: &DiscreteFunction) -> Result<Applied> {
    op.assemble(&Potential::zero(), C64::new(0.0, 0.0))?.apply(f)
}

/// `L₀(f e^{zu})`.
pub fn apply_lz(op: &TransferStage, u: &Potential, z: C64, f: &DiscreteFunction) -> Result<Applied> {
    op.assemble(u, z)?.apply(f)
}

/// Stages `j, …, j+n−1` with their potentials and a common twist `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwistWindow {
    pub stages: Vec<TransferStage>,
    pub potentials: Vec<Potential>,
    pub z: C64,
}

impl TwistWindow {
    pub fn new(stages: Vec<TransferStage>, potentials: Vec<Potential>, z: C64) -> Result<Self> {
        if stages.len() != potentials.len() {
            bail!(Type, "{} stages but {} potentials", stages.len(), potentials.len());
        }
        for w in stages.windows(2) {
            if !(Arc::ptr_eq(&w[0].grid, &w[1].grid) || *w[0].grid == *w[1].grid) {
                bail!(Type, "consecutive stages live on different grids");
            }
        }
        Ok(TwistWindow { stages, potentials, z })
    }

    /// `n` copies of one stage and potential.
    pub fn stationary(stage: TransferStage, u: Potential, n: usize, z: C64) -> Self {
        TwistWindow { stages: vec![stage; n], potentials: vec![u; n], z }
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    pub fn with_z(&self, z: C64) -> Self {
        TwistWindow { z, ..self.clone() }
    }

    pub fn grid(&self) -> Option<&Arc<Grid>> {
        self.stages.first().map(|s| &s.grid)
    }

    /// One operator per stage; repeated (stage, potential) pairs are assembled once.
    pub fn assemble(&self) -> Result<Vec<AssembledOperator>> {
        let mut ops: Vec<AssembledOperator> = Vec::with_capacity(self.len());
        for (i, (s, u)) in self.stages.iter().zip(&self.potentials).enumerate() {
            let seen = (0..i).find(|&j| self.potentials[j] == *u && self.stages[j] == *s);
            let op = match seen {
                Some(j) => ops[j].clone(),
                None => s.assemble(u, self.z)?,
            };
            ops.push(op);
        }
        Ok(ops)
    }

    /// `max_k ‖u_k‖∞` over the window.
    pub fn potential_bound(&self) -> Result<f64> {
        let mut b = 0.0f64;
        for (s, u) in self.stages.iter().zip(&self.potentials) {
            b = b.max(u.sup_norm(&s.grid)?);
        }
        Ok(b)
    }
}

/// `L_z^{j,n} f = L_z^{(j+n−1)} ∘ ⋯ ∘ L_z^{(j)} f`.
pub fn compose_window(w: &TwistWindow, f: &DiscreteFunction) -> Result<Applied> {
    compose_assembled(&w.assemble()?, f)
}

pub fn compose_assembled(ops: &[AssembledOperator], f: &DiscreteFunction) -> Result<Applied> {
    let mut out = Applied { function: f.clone(), tail: 0.0 };
    for op in ops {
        let step = op.apply(&out.function)?;
        // errors already present are propagated through a bounded operator
        out = Applied { tail: out.tail * op.matrix.norm_inf() + step.tail, function: step.function };
    }
    Ok(out)
}

/// `S_{j,n}u(x) = Σ_{k<n} u_{j+k}(T_j^k x)`, stages extended periodically.
pub fn birkhoff_sum(stages: &[TransferStage], potentials: &[Potential], j: usize, n: usize, x: &Point) -> Result<f64> {
    if stages.is_empty() || stages.len() != potentials.len() {
        bail!(Precondition, "need one potential per stage");
    }
    let systems: Vec<SystemStage> = stages.iter().map(|s| s.stage.clone()).collect();
    let orbit = crate::systems::trajectory(&systems, j, x, n.saturating_sub(1))?;
    let mut s = 0.0;
    for (k, p) in orbit.iter().enumerate().take(n) {
        let idx = (j + k) % stages.len();
        s += potentials[idx].value(p, &stages[idx].grid)?;
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LyParams {
    pub q: f64,
    pub alpha: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LyReport {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    pub contraction: f64,
    pub l0_one_sup: f64,
    pub birkhoff_sup: f64,
}

/// Both sides of
/// `‖L_z^{j,n} f‖ ≤ ‖L₀^{j,n} 1‖∞ e^{|Re z| ‖S u‖∞} (v(f) γ^{−α⌊n/n₀⌋} + (1+2Q)(1+‖z‖₁)‖f‖∞)`.
pub fn lasota_yorke_report(w: &TwistWindow, f: &DiscreteFunction, p: LyParams) -> Result<LyReport> {
    let mut meta: Option<CoveringMeta> = None;
    for s in &w.stages {
        let m = match s.covering() {
            Some(m) => m,
            None => bail!(Config, "Lasota-Yorke check needs covering stages with declared constants"),
        };
        meta = Some(match meta {
            None => m,
            Some(a) => CoveringMeta { xi: a.xi.min(m.xi), gamma: a.gamma.min(m.gamma), n0: a.n0.max(m.n0) },
        });
    }
    let n = w.len();
    let (xi, gamma, n0) = match meta {
        Some(m) => (m.xi, m.gamma, m.n0),
        None => (f64::INFINITY, 1.0, 1),
    };
    let image = compose_window(w, f)?.function;
    let lhs = image.norm_alpha(p.alpha, xi)?.total;
    let one = DiscreteFunction::constant(f.grid.clone(), C64::new(1.0, 0.0));
    let l0_one_sup = compose_window(&w.with_z(C64::new(0.0, 0.0)), &one)?.function.sup_norm();
    let mut birkhoff_sup = 0.0;
    for (s, u) in w.stages.iter().zip(&w.potentials) {
        birkhoff_sup += u.sup_norm(&s.grid)?;
    }
    let v = f.norm_alpha(p.alpha, xi)?.seminorm;
    let contraction = libm::pow(gamma, -p.alpha * (n / n0) as f64);
    let z1 = libm::fabs(w.z.re) + libm::fabs(w.z.im);
    let growth = if w.z.re == 0.0 { 1.0 } else { libm::exp(libm::fabs(w.z.re) * birkhoff_sup) };
    let rhs = l0_one_sup * growth * (v * contraction + (1.0 + 2.0 * p.q) * (1.0 + z1) * f.sup_norm());
    Ok(LyReport { lhs, rhs, holds: lhs <= rhs + p.tol, contraction, l0_one_sup, birkhoff_sup })
}
