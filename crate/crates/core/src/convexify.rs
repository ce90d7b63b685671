//! Inner convex approximation of the observer design problem and the
//! sequential convex programming (SCP) loop that drives it.
//!
//! The design constraints `|W1 S| <= 1`, `|W2 S| <= 1`, `|W3 T| <= 1` are
//! not convex in the controller coefficients because the closed-loop
//! denominator `P = D + G N` appears squared in each of them. The key
//! substitution is the affine lower bound
//!
//! ```text
//! Phi = 2 Re(Pc* P) - |Pc|^2  <=  |P|^2          (for any Pc)
//! ```
//!
//! with equality at `P = Pc`. Replacing `|P|^2` by `Phi` turns each
//! constraint into a 2x2 Hermitian positive-semidefiniteness condition
//! that is affine in the decision variables, hence an inner (sufficient)
//! approximation: anything feasible here satisfies the original
//! constraints. Two auxiliary 2x2 blocks couple the bandwidth `zeta` and
//! roll-off level `M` to their reciprocal-square variables `gamma1`,
//! `gamma2` around the previous iterate, and two scalar positivity rows
//! per grid point pin the winding numbers of `P` and `D` to those of the
//! previous iterate so stability certificates can be chained across the
//! run.
//!
//! Every 2x2 block `[[a, b], [b*, c]] >= 0` is lowered to the second-order
//! cone row `a + c >= || (a - c, 2 Re b, 2 Im b) ||`, so any SOC-capable
//! solver plugs in via the [`crate::conic::ConicSolver`] contract.
//!
//! The SCP loop re-linearises at each solution. Because `Pc = P_prev`
//! makes `Phi = |P_prev|^2`, the previous solution stays feasible after
//! re-linearisation and the objective trace `zeta + alpha M` is
//! non-decreasing up to solver tolerance.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::conic::{AffineExpr, ConicSolver, RawSolution, SocProgram, SolveStatus};
use crate::frf::FrfDataset;
use crate::synth::{
    eval_poly, sensitivities, weight_w2, weight_w3, ControllerParams, PerformanceVars, SynthError,
    WeightSpec,
};

#[derive(Debug)]
pub enum ConvexifyError {
    Invalid(String),
    /// The very first conic program is infeasible: the requested weights
    /// cannot be met from the zero-controller starting point. Carries the
    /// blocks most violated at the linearisation point as a diagnostic.
    Infeasible { violated: Vec<String> },
    Numerical(String),
    Io(std::io::Error),
    Parse(String),
}

impl fmt::Display for ConvexifyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConvexifyError::Invalid(m) => write!(f, "invalid synthesis input: {m}"),
            ConvexifyError::Infeasible { violated } => {
                write!(f, "conic program infeasible at the starting point")?;
                if !violated.is_empty() {
                    write!(f, "; most violated blocks: {}", violated.join(", "))?;
                }
                Ok(())
            }
            ConvexifyError::Numerical(m) => write!(f, "numerical failure: {m}"),
            ConvexifyError::Io(e) => write!(f, "i/o error: {e}"),
            ConvexifyError::Parse(m) => write!(f, "parse error: {m}"),
        }
    }
}

impl std::error::Error for ConvexifyError {}

impl From<std::io::Error> for ConvexifyError {
    fn from(e: std::io::Error) -> Self {
        ConvexifyError::Io(e)
    }
}

impl From<SynthError> for ConvexifyError {
    fn from(e: SynthError) -> Self {
        ConvexifyError::Invalid(e.to_string())
    }
}

/// Controller polynomial orders. Six and six cover one resonance and
/// anti-resonance pair plus roll-off.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Orders {
    pub qn: usize,
    pub qd: usize,
}

impl Default for Orders {
    fn default() -> Self {
        Orders { qn: 6, qd: 6 }
    }
}

impl Orders {
    pub fn validated(self) -> Result<Self, ConvexifyError> {
        if self.qd < self.qn {
            return Err(ConvexifyError::Invalid(format!(
                "denominator order {} below numerator order {}",
                self.qd, self.qn
            )));
        }
        if self.qd == 0 {
            return Err(ConvexifyError::Invalid(
                "denominator order must be at least 1".into(),
            ));
        }
        Ok(self)
    }
}

/// Decision-vector layout: `[h_0..h_qn, t_0..t_qd, zeta, M, gamma1,
/// gamma2]`.
#[derive(Debug, Clone, Copy)]
pub struct VarLayout {
    qn: usize,
    qd: usize,
}

impl VarLayout {
    pub fn new(orders: Orders) -> Self {
        VarLayout {
            qn: orders.qn,
            qd: orders.qd,
        }
    }

    pub fn h(&self, k: usize) -> usize {
        debug_assert!(k <= self.qn);
        k
    }

    pub fn t(&self, k: usize) -> usize {
        debug_assert!(k <= self.qd);
        self.qn + 1 + k
    }

    pub fn zeta(&self) -> usize {
        self.qn + self.qd + 2
    }

    pub fn m_var(&self) -> usize {
        self.qn + self.qd + 3
    }

    pub fn gamma1(&self) -> usize {
        self.qn + self.qd + 4
    }

    pub fn gamma2(&self) -> usize {
        self.qn + self.qd + 5
    }

    pub fn num_vars(&self) -> usize {
        self.qn + self.qd + 6
    }
}

/// The previous iterate around which the problem is convexified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearizationPoint {
    pub hc: Vec<f64>,
    pub tc: Vec<f64>,
    pub zeta_c: f64,
    pub m_c: f64,
}

impl LinearizationPoint {
    /// Zero controller with `Dc = z^qd`, a 0.1 Hz bandwidth seed and full
    /// roll-off headroom. The zero controller leaves any open-loop-stable
    /// plant closed-loop stable, so the winding chain starts anchored.
    pub fn initial(orders: Orders) -> Self {
        let mut tc = vec![0.0; orders.qd + 1];
        tc[orders.qd] = 1.0;
        LinearizationPoint {
            hc: vec![0.0; orders.qn + 1],
            tc,
            zeta_c: 2.0 * std::f64::consts::PI * 0.1,
            m_c: 1.0,
        }
    }

    /// [`initial`](Self::initial) with the bandwidth seed moved to the
    /// geometric centre of the measured band. The bandwidth trust region
    /// grows by at most `sqrt(2)` per accepted step, so seeding at the
    /// band centre roughly halves the iterations spent walking `zeta` up
    /// from an arbitrary low guess, without affecting what is reachable.
    /// An aggressive seed can make the very first subproblem infeasible,
    /// so callers should fall back to [`conservative`](Self::conservative).
    pub fn seeded(orders: Orders, dataset: &FrfDataset) -> Self {
        let mut lin = Self::initial(orders);
        let omega = dataset.grid().omega();
        if let (Some(&lo), Some(&hi)) = (omega.first(), omega.last()) {
            let ts = dataset.grid().ts();
            lin.zeta_c = ((lo / ts) * (hi / ts)).sqrt();
        }
        lin
    }

    /// [`initial`](Self::initial) with the bandwidth seed at the lowest
    /// measured frequency. At that seed the zero controller itself
    /// satisfies the convexified subproblem (take `gamma1 = 1 /
    /// w_min^2`: the bandwidth chain then still has `w_min^2` of
    /// headroom), so the first solve can only fail if the specification
    /// itself has an empty feasible set.
    pub fn conservative(orders: Orders, dataset: &FrfDataset) -> Self {
        let mut lin = Self::initial(orders);
        if let Some(&lo) = dataset.grid().omega().first() {
            lin.zeta_c = lo / dataset.grid().ts();
        }
        lin
    }

    /// Check the Theorem-style premises: `Dc` nonzero on the whole grid,
    /// positive bandwidth seed, roll-off level in `(0, 1]`.
    pub fn validate(&self, dataset: &FrfDataset, orders: Orders) -> Result<(), ConvexifyError> {
        if self.hc.len() != orders.qn + 1 || self.tc.len() != orders.qd + 1 {
            return Err(ConvexifyError::Invalid(format!(
                "linearisation coefficient lengths ({}, {}) do not match orders ({}, {})",
                self.hc.len(),
                self.tc.len(),
                orders.qn,
                orders.qd
            )));
        }
        if !(self.zeta_c.is_finite() && self.zeta_c > 0.0) {
            return Err(ConvexifyError::Invalid(format!(
                "zeta_c must be positive, got {}",
                self.zeta_c
            )));
        }
        if !(self.m_c.is_finite() && self.m_c > 0.0 && self.m_c <= 1.0) {
            return Err(ConvexifyError::Invalid(format!(
                "m_c must lie in (0, 1], got {}",
                self.m_c
            )));
        }
        let scale = self.tc.iter().fold(0.0f64, |m, &c| m.max(c.abs()));
        for &omega in dataset.grid().omega() {
            if eval_poly(&self.tc, omega).norm() <= 1e-12 * scale {
                return Err(ConvexifyError::Invalid(format!(
                    "Dc vanishes on the grid at omega = {omega}; cannot linearise there"
                )));
            }
        }
        Ok(())
    }
}

/// Which constraint family a block or row belongs to, for residual
/// reporting and infeasibility diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    Margin,
    Sensitivity,
    CompSensitivity,
    AuxBandwidth,
    AuxRolloff,
    WindingGuardCharacteristic,
    WindingGuardDenominator,
    Bound,
}

impl BlockKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BlockKind::Margin => "margin",
            BlockKind::Sensitivity => "sensitivity",
            BlockKind::CompSensitivity => "comp-sensitivity",
            BlockKind::AuxBandwidth => "aux-bandwidth",
            BlockKind::AuxRolloff => "aux-rolloff",
            BlockKind::WindingGuardCharacteristic => "winding-guard-characteristic",
            BlockKind::WindingGuardDenominator => "winding-guard-denominator",
            BlockKind::Bound => "bound",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockTag {
    pub kind: BlockKind,
    pub config: Option<usize>,
    pub grid: Option<usize>,
}

impl fmt::Display for BlockTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind.as_str())?;
        if let Some(c) = self.config {
            write!(f, "[config {c}")?;
            if let Some(g) = self.grid {
                write!(f, ", grid {g}")?;
            }
            write!(f, "]")?;
        } else if let Some(g) = self.grid {
            write!(f, "[grid {g}]")?;
        }
        Ok(())
    }
}

/// Assembled conic program plus the bookkeeping to interpret a solution.
#[derive(Debug, Clone)]
pub struct ConicProgram {
    pub program: SocProgram,
    pub layout: VarLayout,
    /// One tag per nonnegativity row, aligned with `program.nonneg`.
    pub nonneg_tags: Vec<BlockTag>,
    /// One tag per SOC block, aligned with `program.soc`.
    pub soc_tags: Vec<BlockTag>,
}

/// A complex-valued affine expression carried as (re, im) parts.
#[derive(Debug, Clone)]
struct CxAffine {
    re: AffineExpr,
    im: AffineExpr,
}

/// Evaluation context for one (grid point, configuration) pair.
struct PointCtx {
    g: Complex64,
    /// `z^k` for `k = 0..=max(qn, qd)`.
    zk: Vec<Complex64>,
    /// Physical frequency in rad/s.
    w_phys: f64,
}

impl PointCtx {
    fn new(g: Complex64, omega: f64, ts: f64, layout: &VarLayout) -> Self {
        let top = layout.qn.max(layout.qd);
        let z = Complex64::new(0.0, omega).exp();
        let mut zk = Vec::with_capacity(top + 1);
        let mut acc = Complex64::new(1.0, 0.0);
        for _ in 0..=top {
            zk.push(acc);
            acc *= z;
        }
        PointCtx {
            g,
            zk,
            w_phys: omega / ts,
        }
    }

    /// `D(z, t)` as a complex affine form in the `t` variables.
    fn d_affine(&self, layout: &VarLayout) -> CxAffine {
        let mut re = AffineExpr::constant(0.0);
        let mut im = AffineExpr::constant(0.0);
        for k in 0..=layout.qd {
            re.push(layout.t(k), self.zk[k].re);
            im.push(layout.t(k), self.zk[k].im);
        }
        CxAffine { re, im }
    }

    fn pc(&self, lin: &LinearizationPoint) -> Complex64 {
        let mut d = Complex64::new(0.0, 0.0);
        for (k, &c) in lin.tc.iter().enumerate() {
            d += self.zk[k] * c;
        }
        let mut n = Complex64::new(0.0, 0.0);
        for (k, &c) in lin.hc.iter().enumerate() {
            n += self.zk[k] * c;
        }
        d + self.g * n
    }

    fn dc(&self, lin: &LinearizationPoint) -> Complex64 {
        let mut d = Complex64::new(0.0, 0.0);
        for (k, &c) in lin.tc.iter().enumerate() {
            d += self.zk[k] * c;
        }
        d
    }
}

/// `Phi = 2 Re(Pc* P) - |Pc|^2`, affine in `(h, t)`. Returns the
/// expression together with `Pc` for reuse.
pub fn phi_affine(
    g: Complex64,
    lin: &LinearizationPoint,
    omega: f64,
    ts: f64,
    layout: &VarLayout,
) -> (AffineExpr, Complex64) {
    let ctx = PointCtx::new(g, omega, ts, layout);
    let pc = ctx.pc(lin);
    let mut phi = AffineExpr::constant(-pc.norm_sqr());
    let pc_conj = pc.conj();
    for k in 0..=layout.qd {
        phi.push(layout.t(k), 2.0 * (pc_conj * ctx.zk[k]).re);
    }
    for k in 0..=layout.qn {
        phi.push(layout.h(k), 2.0 * (pc_conj * g * ctx.zk[k]).re);
    }
    (phi, pc)
}

/// Lower `[[a, b], [b*, c]] >= 0` (a, c real affine; b complex affine) to
/// the SOC row vector `[a + c, a - c, 2 Re b, 2 Im b]`.
fn hermitian_2x2_to_soc(a: &AffineExpr, b: &CxAffine, c: &AffineExpr) -> Vec<AffineExpr> {
    vec![
        a.plus(c),
        a.minus(c),
        b.re.scaled(2.0),
        b.im.scaled(2.0),
    ]
}

/// Floor for the `|Pc|` block scale; a characteristic polynomial this
/// close to the origin is unusable anyway (the winding guards keep
/// accepted iterates far from it).
fn pc_scale(pc: Complex64) -> f64 {
    pc.norm().max(1e-9)
}

/// Modulus-margin block `[[Phi, sigma D], [sigma D*, 1]] >= 0`: feasible
/// points satisfy `sigma^2 |D|^2 <= Phi <= |P|^2`, hence `|W1 S| <= 1`.
/// The block is preconditioned by the congruence `diag(1/|Pc|, 1)` so its
/// entries sit near unity at a feasible point; congruence by a constant
/// positive-definite matrix changes no feasible set.
pub fn margin_block(
    g: Complex64,
    lin: &LinearizationPoint,
    sigma: f64,
    omega: f64,
    ts: f64,
    layout: &VarLayout,
) -> Vec<AffineExpr> {
    let ctx = PointCtx::new(g, omega, ts, layout);
    let (phi, pc) = phi_affine(g, lin, omega, ts, layout);
    let u = pc_scale(pc);
    let d = ctx.d_affine(layout);
    let sd = CxAffine {
        re: d.re.scaled(sigma / u),
        im: d.im.scaled(sigma / u),
    };
    hermitian_2x2_to_soc(&phi.scaled(1.0 / (u * u)), &sd, &AffineExpr::constant(1.0))
}

/// Per-grid-point sensitivity block `[[Phi, D], [D*, w_phys^2 gamma1]]`.
/// Together with the auxiliary bandwidth block this enforces
/// `|W2 S| <= 1` with `W2 = zeta / (j w_phys)`. Preconditioned by
/// `diag(1/|Pc|, zeta_c / w_phys)`.
pub fn sensitivity_block(
    g: Complex64,
    lin: &LinearizationPoint,
    omega: f64,
    ts: f64,
    layout: &VarLayout,
) -> Vec<AffineExpr> {
    let ctx = PointCtx::new(g, omega, ts, layout);
    let (phi, pc) = phi_affine(g, lin, omega, ts, layout);
    let u = pc_scale(pc);
    let v = lin.zeta_c / ctx.w_phys;
    let d = ctx.d_affine(layout);
    let dv = CxAffine {
        re: d.re.scaled(v / u),
        im: d.im.scaled(v / u),
    };
    let zc2 = lin.zeta_c * lin.zeta_c;
    let w2g = AffineExpr::variable(layout.gamma1(), zc2, 0.0);
    hermitian_2x2_to_soc(&phi.scaled(1.0 / (u * u)), &dv, &w2g)
}

/// Global auxiliary block `[[2 zeta_c^2 - gamma1 zeta_c^4, zeta], [zeta,
/// 1]] >= 0`, which yields `zeta^2 gamma1 <= 1` for any feasible pair and
/// restricts `zeta < sqrt(2) zeta_c` (the loop's built-in trust region).
/// Preconditioned by `diag(1/zeta_c, 1)`.
pub fn aux_bandwidth_block(lin: &LinearizationPoint, layout: &VarLayout) -> Vec<AffineExpr> {
    let zc2 = lin.zeta_c * lin.zeta_c;
    let a = AffineExpr::variable(layout.gamma1(), -zc2, 2.0);
    let one = AffineExpr::constant(1.0);
    vec![
        a.plus(&one),
        a.minus(&one),
        AffineExpr::variable(layout.zeta(), 2.0 / lin.zeta_c, 0.0),
    ]
}

/// Per-grid-point roll-off block `[[Phi, Y], [Y*, gamma2]]` with
/// `Y = (tau j w_phys + 1)^order G N`, affine in `h`. Preconditioned by
/// `diag(1/|Pc|, m_c)`.
pub fn comp_sensitivity_block(
    g: Complex64,
    lin: &LinearizationPoint,
    spec: &WeightSpec,
    omega: f64,
    ts: f64,
    layout: &VarLayout,
) -> Vec<AffineExpr> {
    let ctx = PointCtx::new(g, omega, ts, layout);
    let (phi, pc) = phi_affine(g, lin, omega, ts, layout);
    let u = pc_scale(pc);
    let w3f = Complex64::new(1.0, spec.tau * ctx.w_phys).powu(spec.order) * (lin.m_c / u);
    let mut y_re = AffineExpr::constant(0.0);
    let mut y_im = AffineExpr::constant(0.0);
    for k in 0..=layout.qn {
        let c = w3f * g * ctx.zk[k];
        y_re.push(layout.h(k), c.re);
        y_im.push(layout.h(k), c.im);
    }
    let y = CxAffine { re: y_re, im: y_im };
    let g2 = AffineExpr::variable(layout.gamma2(), lin.m_c * lin.m_c, 0.0);
    hermitian_2x2_to_soc(&phi.scaled(1.0 / (u * u)), &y, &g2)
}

/// Global auxiliary block `[[2 m_c^2 - gamma2 m_c^4, M], [M, 1]] >= 0`,
/// preconditioned by `diag(1/m_c, 1)`.
pub fn aux_rolloff_block(lin: &LinearizationPoint, layout: &VarLayout) -> Vec<AffineExpr> {
    let mc2 = lin.m_c * lin.m_c;
    let a = AffineExpr::variable(layout.gamma2(), -mc2, 2.0);
    let one = AffineExpr::constant(1.0);
    vec![
        a.plus(&one),
        a.minus(&one),
        AffineExpr::variable(layout.m_var(), 2.0 / lin.m_c, 0.0),
    ]
}

/// Two strict-positivity rows pinning the winding numbers of `P` and `D`
/// to the linearisation point: `2 Re(Pc* P) / |Pc|^2 >= eps` and
/// `2 Re(Dc* D) / |Dc|^2 >= eps` with `eps = 1e-9`.
pub fn winding_guards(
    g: Complex64,
    lin: &LinearizationPoint,
    omega: f64,
    ts: f64,
    layout: &VarLayout,
) -> [AffineExpr; 2] {
    const EPS_WIND: f64 = 1e-9;
    let ctx = PointCtx::new(g, omega, ts, layout);
    let pc = ctx.pc(lin);
    let sp = pc_scale(pc).powi(2);
    let pc_conj = pc.conj();
    let mut guard_p = AffineExpr::constant(-EPS_WIND * pc.norm_sqr() / sp);
    for k in 0..=layout.qd {
        guard_p.push(layout.t(k), 2.0 * (pc_conj * ctx.zk[k]).re / sp);
    }
    for k in 0..=layout.qn {
        guard_p.push(layout.h(k), 2.0 * (pc_conj * g * ctx.zk[k]).re / sp);
    }
    let dc = ctx.dc(lin);
    let sd = dc.norm().max(1e-9).powi(2);
    let dc_conj = dc.conj();
    let mut guard_d = AffineExpr::constant(-EPS_WIND * dc.norm_sqr() / sd);
    for k in 0..=layout.qd {
        guard_d.push(layout.t(k), 2.0 * (dc_conj * ctx.zk[k]).re / sd);
    }
    [guard_p, guard_d]
}

/// Strictness margin for the scalar bounds, scaled by the linearisation
/// magnitudes per variable.
const EPS_POS: f64 = 1e-9;

/// Assemble the full conic program for one linearisation point: per
/// (grid point, configuration) one margin, one sensitivity and one
/// roll-off SOC block plus two winding-guard rows; two global auxiliary
/// blocks; scalar bounds `0 < zeta < tau^{-order}`, `0 < M <= 1`,
/// `gamma1, gamma2 > 0`. Objective: maximise `zeta + alpha M`.
pub fn assemble(
    dataset: &FrfDataset,
    spec: &WeightSpec,
    lin: &LinearizationPoint,
    orders: Orders,
) -> Result<ConicProgram, ConvexifyError> {
    let spec = (*spec).validated()?;
    let orders = orders.validated()?;
    lin.validate(dataset, orders)?;
    let layout = VarLayout::new(orders);
    let ts = dataset.grid().ts();
    let mut program = SocProgram {
        num_vars: layout.num_vars(),
        objective: vec![0.0; layout.num_vars()],
        nonneg: Vec::new(),
        soc: Vec::new(),
    };
    program.objective[layout.zeta()] = 1.0;
    program.objective[layout.m_var()] = spec.alpha;
    let mut nonneg_tags = Vec::new();
    let mut soc_tags = Vec::new();
    for (cfg_idx, cfg) in dataset.configs().iter().enumerate() {
        for (grid_idx, (&omega, &g)) in dataset
            .grid()
            .omega()
            .iter()
            .zip(cfg.response())
            .enumerate()
        {
            let tag = |kind| BlockTag {
                kind,
                config: Some(cfg_idx),
                grid: Some(grid_idx),
            };
            program
                .soc
                .push(margin_block(g, lin, spec.sigma, omega, ts, &layout));
            soc_tags.push(tag(BlockKind::Margin));
            program
                .soc
                .push(sensitivity_block(g, lin, omega, ts, &layout));
            soc_tags.push(tag(BlockKind::Sensitivity));
            program
                .soc
                .push(comp_sensitivity_block(g, lin, &spec, omega, ts, &layout));
            soc_tags.push(tag(BlockKind::CompSensitivity));
            let [guard_p, guard_d] = winding_guards(g, lin, omega, ts, &layout);
            program.nonneg.push(guard_p);
            nonneg_tags.push(tag(BlockKind::WindingGuardCharacteristic));
            program.nonneg.push(guard_d);
            nonneg_tags.push(tag(BlockKind::WindingGuardDenominator));
        }
    }
    program.soc.push(aux_bandwidth_block(lin, &layout));
    soc_tags.push(BlockTag {
        kind: BlockKind::AuxBandwidth,
        config: None,
        grid: None,
    });
    program.soc.push(aux_rolloff_block(lin, &layout));
    soc_tags.push(BlockTag {
        kind: BlockKind::AuxRolloff,
        config: None,
        grid: None,
    });
    let bound_tag = BlockTag {
        kind: BlockKind::Bound,
        config: None,
        grid: None,
    };
    // zeta >= eps * zeta_c, zeta <= (1 - eps) min(tau^{-order}, w_max):
    // a bandwidth claim above the highest measured frequency would rest
    // on no data at all. Each row is divided by its natural magnitude so
    // its entries sit near unity.
    let w_max_phys = dataset.grid().omega().last().copied().unwrap_or(0.0) / ts;
    let zeta_cap = spec.zeta_upper().min(w_max_phys);
    program.nonneg.push(AffineExpr::variable(
        layout.zeta(),
        1.0 / lin.zeta_c,
        -EPS_POS,
    ));
    program.nonneg.push(AffineExpr::variable(
        layout.zeta(),
        -1.0 / zeta_cap,
        1.0 - EPS_POS,
    ));
    // M >= eps * m_c, M <= 1.
    program
        .nonneg
        .push(AffineExpr::variable(layout.m_var(), 1.0 / lin.m_c, -EPS_POS));
    program
        .nonneg
        .push(AffineExpr::variable(layout.m_var(), -1.0, 1.0));
    // gamma1, gamma2 > 0, scaled by their natural magnitudes.
    program.nonneg.push(AffineExpr::variable(
        layout.gamma1(),
        lin.zeta_c * lin.zeta_c,
        -EPS_POS,
    ));
    program.nonneg.push(AffineExpr::variable(
        layout.gamma2(),
        lin.m_c * lin.m_c,
        -EPS_POS,
    ));
    for _ in 0..6 {
        nonneg_tags.push(bound_tag);
    }
    Ok(ConicProgram {
        program,
        layout,
        nonneg_tags,
        soc_tags,
    })
}

/// One candidate decision point.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub h: Vec<f64>,
    pub t: Vec<f64>,
    pub zeta: f64,
    pub m_var: f64,
    pub gamma1: f64,
    pub gamma2: f64,
}

impl Candidate {
    fn from_x(x: &[f64], layout: &VarLayout) -> Self {
        Candidate {
            h: (0..=layout.qn).map(|k| x[layout.h(k)]).collect(),
            t: (0..=layout.qd).map(|k| x[layout.t(k)]).collect(),
            zeta: x[layout.zeta()],
            m_var: x[layout.m_var()],
            gamma1: x[layout.gamma1()],
            gamma2: x[layout.gamma2()],
        }
    }

    /// Scale so `max |t_k| = 1`; the quotient `N/D` and hence every
    /// constraint value is unchanged.
    fn normalized(mut self) -> Self {
        let peak = self.t.iter().fold(0.0f64, |m, &c| m.max(c.abs()));
        if peak > 0.0 {
            let s = 1.0 / peak;
            self.h.iter_mut().for_each(|c| *c *= s);
            self.t.iter_mut().for_each(|c| *c *= s);
        }
        self
    }
}

/// Violation of one block at a point: for SOC blocks the negative part of
/// the smallest eigenvalue of the 2x2 Hermitian form, for scalar rows the
/// negative part of the expression.
fn block_violation(rows: &[AffineExpr], x: &[f64]) -> f64 {
    debug_assert!(rows.len() >= 3);
    let r: Vec<f64> = rows.iter().map(|e| e.eval(x)).collect();
    let a = (r[0] + r[1]) / 2.0;
    let c = (r[0] - r[1]) / 2.0;
    let b_sq = (r[2] * r[2] + r.get(3).map_or(0.0, |v| v * v)) / 4.0;
    let min_eig = (a + c) / 2.0 - (((a - c) / 2.0).powi(2) + b_sq).sqrt();
    (-min_eig).max(0.0)
}

/// Solver verdict plus everything needed to audit it.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub status: SolveStatus,
    /// Objective `zeta + alpha M` at the returned point.
    pub objective: f64,
    pub solver_iterations: usize,
    /// `(tag, violation)` for every block of the program.
    pub residuals: Vec<(BlockTag, f64)>,
    pub max_violation: f64,
    /// Backend status text, for diagnostics.
    pub detail: String,
}

impl SolveReport {
    /// Worst violation per block family.
    pub fn residuals_by_kind(&self) -> BTreeMap<String, f64> {
        let mut map = BTreeMap::new();
        for (tag, v) in &self.residuals {
            let slot = map.entry(tag.kind.as_str().to_string()).or_insert(0.0f64);
            *slot = slot.max(*v);
        }
        map
    }
}

/// Residual ceiling for a solution to count as clean. A preconditioned
/// block deficit of `v` loosens the replayed constraint moduli by at
/// most `v`, so this must stay well under the `1e-6` replay allowance;
/// multi-configuration banks need the headroom above the backend's
/// `~1e-7` attainable precision.
pub const RESIDUAL_TOL: f64 = 5e-7;

/// Ceiling on the audited violation of a point that may still refresh
/// the linearisation without being accepted. Near a degenerate corner
/// (e.g. the roll-off level pinned at its bound) interior-point
/// residuals can creep past [`RESIDUAL_TOL`] while the point itself
/// stays an excellent expansion centre; anything past this ceiling is
/// genuinely off-cone and would poison the next subproblem.
pub const SALVAGE_TOL: f64 = 1e-5;

/// Solve an assembled program and audit the returned point blockwise.
/// The verdict is based on the audit, not the backend's label: a point
/// whose worst violation exceeds [`RESIDUAL_TOL`] is demoted to a
/// numerical failure even if the backend claims optimality, and a point
/// the backend gave up on (stalled interior-point progress) is still
/// accepted when the audit passes — a primal-feasible point's objective
/// is a legitimate achieved value regardless of the gap.
///
/// A finite point is returned even when the audit fails (with a
/// non-`Optimal` status); callers may use such a point to refresh a
/// linearisation, but must not treat it as feasible.
pub fn solve(
    cp: &ConicProgram,
    solver: &dyn ConicSolver,
) -> (SolveReport, Option<Candidate>) {
    let raw: RawSolution = solver.solve(&cp.program);
    let mut residuals = Vec::with_capacity(cp.nonneg_tags.len() + cp.soc_tags.len());
    let mut max_violation = 0.0f64;
    let usable = raw.status != SolveStatus::Infeasible
        && raw.x.len() == cp.layout.num_vars()
        && raw.x.iter().all(|v| v.is_finite());
    if usable {
        for (expr, &tag) in cp.program.nonneg.iter().zip(&cp.nonneg_tags) {
            let v = (-expr.eval(&raw.x)).max(0.0);
            max_violation = max_violation.max(v);
            residuals.push((tag, v));
        }
        for (rows, &tag) in cp.program.soc.iter().zip(&cp.soc_tags) {
            let v = block_violation(rows, &raw.x);
            max_violation = max_violation.max(v);
            residuals.push((tag, v));
        }
    }
    let status = if raw.status == SolveStatus::Infeasible {
        SolveStatus::Infeasible
    } else if usable && max_violation <= RESIDUAL_TOL {
        SolveStatus::Optimal
    } else {
        SolveStatus::NumericalFailure
    };
    let candidate = if usable {
        Some(Candidate::from_x(&raw.x, &cp.layout))
    } else {
        None
    };
    (
        SolveReport {
            status,
            objective: raw.objective,
            solver_iterations: raw.solver_iterations,
            residuals,
            max_violation,
            detail: raw.detail,
        },
        candidate,
    )
}

/// SCP loop options.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthOptions {
    /// Relative objective change below which an iteration counts as
    /// converged; two consecutive such iterations stop the loop.
    pub tol_obj: f64,
    pub max_iter: usize,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions {
            tol_obj: 1e-4,
            max_iter: 50,
        }
    }
}

/// One accepted iterate of the SCP loop (also the linearisation history
/// consumed by stability certification).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterateRecord {
    pub h: Vec<f64>,
    pub t: Vec<f64>,
    pub zeta: f64,
    pub m_var: f64,
}

/// Worst-case moduli of the three original constraints after a replay of
/// the final controller through the exact closed-loop formulas. All three
/// must be at most 1 (plus rounding) for a sound synthesis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplayPeaks {
    pub w1_s: f64,
    pub w2_s: f64,
    pub w3_t: f64,
}

/// Outcome of one synthesis run.
#[derive(Debug, Clone)]
pub struct SynthesisResult {
    pub params: ControllerParams,
    pub perf: PerformanceVars,
    pub gamma1: f64,
    pub gamma2: f64,
    pub objective_trace: Vec<f64>,
    /// Linearisation history: the initial point followed by every
    /// accepted solution, in order. Feed to stability certification.
    pub iterates: Vec<IterateRecord>,
    pub converged: bool,
    pub iterations: usize,
    /// Worst violation per block family at the final solve.
    pub residuals: BTreeMap<String, f64>,
    pub replay: ReplayPeaks,
}

/// Replay a controller through the exact (non-convexified) constraints.
pub fn replay_peaks(
    dataset: &FrfDataset,
    spec: &WeightSpec,
    params: &ControllerParams,
    zeta: f64,
    m_var: f64,
) -> Result<ReplayPeaks, SynthError> {
    let ts = dataset.grid().ts();
    let mut peaks = ReplayPeaks {
        w1_s: 0.0,
        w2_s: 0.0,
        w3_t: 0.0,
    };
    for cfg in 0..dataset.n_configs() {
        for point in dataset.points(cfg) {
            let sens = sensitivities(point.value, params.h(), params.t(), point.omega)?;
            let s_mag = sens.s.norm();
            let t_mag = sens.t.norm();
            peaks.w1_s = peaks.w1_s.max(spec.sigma * s_mag);
            peaks.w2_s = peaks
                .w2_s
                .max(weight_w2(zeta, point.omega, ts).norm() * s_mag);
            peaks.w3_t = peaks
                .w3_t
                .max(weight_w3(m_var, point.omega, spec, ts).norm() * t_mag);
        }
    }
    Ok(peaks)
}

fn record(lin: &LinearizationPoint) -> IterateRecord {
    IterateRecord {
        h: lin.hc.clone(),
        t: lin.tc.clone(),
        zeta: lin.zeta_c,
        m_var: lin.m_c,
    }
}

/// Most-violated block tags at the linearisation point, for the
/// first-iteration infeasibility diagnostic.
fn violated_blocks_at(cp: &ConicProgram, lin: &LinearizationPoint) -> Vec<String> {
    let layout = &cp.layout;
    let mut x = vec![0.0; layout.num_vars()];
    for (k, &c) in lin.hc.iter().enumerate() {
        x[layout.h(k)] = c;
    }
    for (k, &c) in lin.tc.iter().enumerate() {
        x[layout.t(k)] = c;
    }
    x[layout.zeta()] = lin.zeta_c;
    x[layout.m_var()] = lin.m_c;
    x[layout.gamma1()] = 1.0 / (lin.zeta_c * lin.zeta_c);
    x[layout.gamma2()] = 1.0 / (lin.m_c * lin.m_c);
    let mut violations: Vec<(f64, String)> = Vec::new();
    for (expr, tag) in cp.program.nonneg.iter().zip(&cp.nonneg_tags) {
        let v = (-expr.eval(&x)).max(0.0);
        if v > 1e-9 {
            violations.push((v, tag.to_string()));
        }
    }
    for (rows, tag) in cp.program.soc.iter().zip(&cp.soc_tags) {
        let v = block_violation(rows, &x);
        if v > 1e-9 {
            violations.push((v, tag.to_string()));
        }
    }
    violations.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    violations.truncate(12);
    violations.into_iter().map(|(_, t)| t).collect()
}

/// Run the sequential convex programming loop to convergence.
pub fn synthesize(
    dataset: &FrfDataset,
    spec: &WeightSpec,
    orders: Orders,
    options: SynthOptions,
    solver: &dyn ConicSolver,
) -> Result<SynthesisResult, ConvexifyError> {
    let spec = (*spec).validated()?;
    let orders = orders.validated()?;
    if !(options.tol_obj.is_finite() && options.tol_obj > 0.0) || options.max_iter == 0 {
        return Err(ConvexifyError::Invalid(format!(
            "bad SCP options: tol_obj = {}, max_iter = {}",
            options.tol_obj, options.max_iter
        )));
    }
    // The band-centre seed reaches the optimum in roughly half the
    // iterations, but an aggressive bandwidth seed can render the very
    // first subproblem infeasible (the gamma-coupled sensitivity rows
    // demand |S| <= sqrt(2) w / zeta_c before any loop gain exists). Fall
    // back to the provably feasible seed before declaring the
    // specification itself infeasible.
    let seeded = LinearizationPoint::seeded(orders, dataset);
    let fallback = LinearizationPoint::conservative(orders, dataset);
    match run_scp(dataset, &spec, orders, &options, solver, seeded.clone()) {
        Err(_) if seeded.zeta_c != fallback.zeta_c => {
            run_scp(dataset, &spec, orders, &options, solver, fallback)
        }
        other => other,
    }
}

fn run_scp(
    dataset: &FrfDataset,
    spec: &WeightSpec,
    orders: Orders,
    options: &SynthOptions,
    solver: &dyn ConicSolver,
    seed: LinearizationPoint,
) -> Result<SynthesisResult, ConvexifyError> {
    let ts = dataset.grid().ts();
    let mut lin = seed;
    let mut iterates = vec![record(&lin)];
    let mut trace: Vec<f64> = Vec::new();
    let mut accepted: Option<(Candidate, SolveReport)> = None;
    let mut converged = false;
    let mut small_changes = 0usize;
    let mut iterations = 0usize;
    let mut dirty_run = 0usize;
    for iter in 0..options.max_iter {
        let cp = assemble(dataset, &spec, &lin, orders)?;
        let (report, candidate) = solve(&cp, solver);
        // A usable step must pass the audit and must not regress the
        // objective (the previous point stays feasible after
        // re-linearisation, so a regression means the backend wandered).
        let ascent = trace
            .last()
            .map_or(true, |&l| report.objective >= l - 1e-6 * l.abs().max(1.0));
        match candidate {
            Some(cand) if report.status == SolveStatus::Optimal && ascent => {
                iterations = iter + 1;
                dirty_run = 0;
                let objective = report.objective;
                let cand = cand.normalized();
                // Clamp the boundary variables against solver tolerance so
                // the next linearisation point stays strictly admissible.
                lin = LinearizationPoint {
                    hc: cand.h.clone(),
                    tc: cand.t.clone(),
                    zeta_c: cand.zeta.max(f64::MIN_POSITIVE),
                    m_c: cand.m_var.clamp(f64::MIN_POSITIVE, 1.0),
                };
                iterates.push(record(&lin));
                if let Some(prev) = trace.last() {
                    let rel = (objective - prev).abs() / prev.abs().max(1e-12);
                    if rel < options.tol_obj {
                        small_changes += 1;
                    } else {
                        small_changes = 0;
                    }
                }
                trace.push(objective);
                accepted = Some((cand, report));
                if small_changes >= 2 {
                    converged = true;
                    break;
                }
            }
            // A finite, ascending point that narrowly fails the audit is
            // still an excellent place to re-linearise: the refreshed
            // subproblem is exact there and usually better conditioned
            // than the stalled one. The point is deliberately not
            // recorded — the returned result and the certification
            // history hold audited iterates only, and consecutive
            // recorded iterates are checked pairwise by the certificate
            // regardless of how the linearisation travelled in between.
            Some(cand)
                if iter > 0
                    && ascent
                    && dirty_run < 3
                    && report.max_violation <= SALVAGE_TOL =>
            {
                dirty_run += 1;
                let cand = cand.normalized();
                lin = LinearizationPoint {
                    hc: cand.h,
                    tc: cand.t,
                    zeta_c: cand.zeta.max(f64::MIN_POSITIVE),
                    m_c: cand.m_var.clamp(f64::MIN_POSITIVE, 1.0),
                };
            }
            _ => {
                if iter == 0 {
                    if report.status == SolveStatus::Infeasible {
                        return Err(ConvexifyError::Infeasible {
                            violated: violated_blocks_at(&cp, &lin),
                        });
                    }
                    return Err(ConvexifyError::Numerical(format!(
                        "solver reported {} ({}) on the first iteration \
                         (worst block violation {:.3e})",
                        report.status, report.detail, report.max_violation
                    )));
                }
                // Later-iteration trouble: stop refining, keep the last
                // accepted iterate and leave `converged` unset.
                break;
            }
        }
    }
    let (cand, report) = accepted.ok_or_else(|| {
        ConvexifyError::Numerical("no iteration produced a usable solution".into())
    })?;
    let params = ControllerParams::new(orders.qn, orders.qd, cand.h, cand.t, ts)?;
    let perf = PerformanceVars::new(
        cand.zeta,
        cand.m_var.clamp(f64::MIN_POSITIVE, 1.0),
        &spec,
    )?;
    let replay = replay_peaks(dataset, &spec, &params, perf.zeta, perf.m_var)?;
    Ok(SynthesisResult {
        params,
        perf,
        gamma1: cand.gamma1,
        gamma2: cand.gamma2,
        objective_trace: trace,
        iterates,
        converged,
        iterations,
        residuals: report.residuals_by_kind(),
        replay,
    })
}

#[derive(Serialize, Deserialize)]
struct ResultFile {
    qn: usize,
    qd: usize,
    h: Vec<f64>,
    t: Vec<f64>,
    ts_seconds: f64,
    zeta: f64,
    m: f64,
    gamma1: f64,
    gamma2: f64,
    objective_trace: Vec<f64>,
    converged: bool,
    iterations: usize,
    residuals: BTreeMap<String, f64>,
    replay: ReplayPeaks,
    iterates: Vec<IterateRecord>,
}

pub fn save_result(result: &SynthesisResult, path: impl AsRef<Path>) -> Result<(), ConvexifyError> {
    let file = ResultFile {
        qn: result.params.qn(),
        qd: result.params.qd(),
        h: result.params.h().to_vec(),
        t: result.params.t().to_vec(),
        ts_seconds: result.params.ts(),
        zeta: result.perf.zeta,
        m: result.perf.m_var,
        gamma1: result.gamma1,
        gamma2: result.gamma2,
        objective_trace: result.objective_trace.clone(),
        converged: result.converged,
        iterations: result.iterations,
        residuals: result.residuals.clone(),
        replay: result.replay,
        iterates: result.iterates.clone(),
    };
    let text = serde_json::to_string_pretty(&file).map_err(|e| ConvexifyError::Parse(e.to_string()))?;
    fs::write(path.as_ref(), text + "\n")?;
    Ok(())
}

pub fn load_result(path: impl AsRef<Path>) -> Result<SynthesisResult, ConvexifyError> {
    let text = fs::read_to_string(path.as_ref())?;
    let file: ResultFile =
        serde_json::from_str(&text).map_err(|e| ConvexifyError::Parse(e.to_string()))?;
    let params = ControllerParams::new(file.qn, file.qd, file.h, file.t, file.ts_seconds)?;
    if !(file.zeta.is_finite() && file.zeta > 0.0) {
        return Err(ConvexifyError::Parse(format!("bad zeta {}", file.zeta)));
    }
    if !(file.m.is_finite() && file.m > 0.0 && file.m <= 1.0) {
        return Err(ConvexifyError::Parse(format!("bad M {}", file.m)));
    }
    Ok(SynthesisResult {
        params,
        perf: PerformanceVars {
            zeta: file.zeta,
            m_var: file.m,
        },
        gamma1: file.gamma1,
        gamma2: file.gamma2,
        objective_trace: file.objective_trace,
        iterates: file.iterates,
        converged: file.converged,
        iterations: file.iterations,
        residuals: file.residuals,
        replay: file.replay,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::ClarabelSolver;
    use crate::frf::{Channel, FrequencyGrid, FrfDataset};
    use crate::plant::{TwoMassParams, TwoMassPlant};

    /// A stable, damped single-mass velocity plant (rigid surrogate). The
    /// grid runs to the Nyquist frequency: an FRF that stops short leaves
    /// the top arc of the unit circle unconstrained, and the optimiser
    /// will park closed-loop resonance there.
    fn rigid_dataset(points: usize) -> FrfDataset {
        let inertia = 0.27;
        let damping = 0.4;
        let ts = 1e-3;
        let grid = FrequencyGrid::log_spaced(0.05, 500.0, points, ts).unwrap();
        let pole = (-damping * ts / inertia).exp();
        let gain = (1.0 - pole) / damping;
        let response: Vec<Complex64> = grid
            .omega()
            .iter()
            .map(|&w| {
                let z = Complex64::new(0.0, w).exp();
                gain / (z - pole)
            })
            .collect();
        FrfDataset::new(grid, Channel::LoadVelocity, vec![("rigid".into(), response)]).unwrap()
    }

    fn flexible_dataset() -> FrfDataset {
        let plant = TwoMassPlant::new(TwoMassParams {
            motor_inertia: 0.0679,
            motor_damping: 0.34,
            link_inertia: 0.2037,
            link_damping: 0.043,
            stiffness: 452.4,
            ts: 1e-3,
        })
        .unwrap();
        let grid = FrequencyGrid::log_spaced(0.05, 500.0, 160, 1e-3).unwrap();
        let response = plant.frf(&grid, Channel::LoadVelocity);
        FrfDataset::new(grid, Channel::LoadVelocity, vec![("med".into(), response)]).unwrap()
    }

    #[test]
    fn phi_equals_pc_norm_at_the_linearisation_point() {
        let orders = Orders { qn: 2, qd: 3 };
        let layout = VarLayout::new(orders);
        let lin = LinearizationPoint {
            hc: vec![0.3, -0.2, 0.5],
            tc: vec![0.1, 0.0, -0.4, 1.0],
            zeta_c: 1.0,
            m_c: 0.8,
        };
        let g = Complex64::new(0.7, -0.4);
        let (phi, pc) = phi_affine(g, &lin, 0.9, 1e-3, &layout);
        let mut x = vec![0.0; layout.num_vars()];
        for (k, &c) in lin.hc.iter().enumerate() {
            x[layout.h(k)] = c;
        }
        for (k, &c) in lin.tc.iter().enumerate() {
            x[layout.t(k)] = c;
        }
        assert!((phi.eval(&x) - pc.norm_sqr()).abs() < 1e-12);
        // P = 0 (all coefficients zero) gives Phi = -|Pc|^2.
        let zero = vec![0.0; layout.num_vars()];
        assert!((phi.eval(&zero) + pc.norm_sqr()).abs() < 1e-12);
    }

    #[test]
    fn phi_underestimates_p_squared() {
        // Inner-approximation inequality on random points.
        let orders = Orders { qn: 2, qd: 2 };
        let layout = VarLayout::new(orders);
        let mut seed = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 11) as f64 / (1u64 << 53) as f64) * 4.0 - 2.0
        };
        for _ in 0..1000 {
            let lin = LinearizationPoint {
                hc: vec![next(), next(), next()],
                tc: vec![next(), next(), 1.0],
                zeta_c: 1.0,
                m_c: 1.0,
            };
            let g = Complex64::new(next(), next());
            let omega = 0.1 + next().abs();
            let (phi, _) = phi_affine(g, &lin, omega, 1e-3, &layout);
            let mut x = vec![0.0; layout.num_vars()];
            for k in 0..layout.qn + 1 {
                x[layout.h(k)] = next();
            }
            for k in 0..layout.qd + 1 {
                x[layout.t(k)] = next();
            }
            let h: Vec<f64> = (0..=layout.qn).map(|k| x[layout.h(k)]).collect();
            let t: Vec<f64> = (0..=layout.qd).map(|k| x[layout.t(k)]).collect();
            let p = eval_poly(&t, omega) + g * eval_poly(&h, omega);
            assert!(
                phi.eval(&x) <= p.norm_sqr() + 1e-9,
                "Phi must lower-bound |P|^2"
            );
        }
    }

    #[test]
    fn aux_block_is_a_trust_region() {
        // [[2 zc^2 - g zc^4, z], [z, 1]] cannot be PSD for z > sqrt(2) zc,
        // whatever gamma does.
        let zc = 3.0f64;
        let zeta = 2.0f64.sqrt() * zc * 1.001;
        for i in 0..10000 {
            let gamma = 1e-6 + i as f64 * 1e-3;
            let a = 2.0 * zc.powi(2) - gamma * zc.powi(4);
            let det = a - zeta * zeta;
            assert!(det < 0.0, "gamma = {gamma} should not admit zeta = {zeta}");
        }
        // And gamma = zc^{-2} admits exactly zeta = zc (boundary).
        let gamma = zc.powi(-2);
        let a = 2.0 * zc.powi(2) - gamma * zc.powi(4);
        assert!((a - zc * zc).abs() < 1e-9);
    }

    #[test]
    fn assemble_counts_blocks_per_spec_shape() {
        let ts = 1e-3;
        let grid = FrequencyGrid::new(vec![0.1, 0.5, 1.0], ts).unwrap();
        let response = vec![Complex64::new(1.0, -0.5); 3];
        let one = FrfDataset::new(
            grid.clone(),
            Channel::LoadVelocity,
            vec![("a".into(), response.clone())],
        )
        .unwrap();
        let spec = WeightSpec::default();
        let orders = Orders::default();
        let lin = LinearizationPoint::initial(orders);
        let cp = assemble(&one, &spec, &lin, orders).unwrap();
        // 3 margin + 3 sensitivity + 3 comp-sensitivity + 2 auxiliary SOC
        // blocks; 6 winding guards + 6 bounds as scalar rows.
        assert_eq!(cp.program.soc.len(), 11);
        assert_eq!(cp.program.nonneg.len(), 12);
        let two = FrfDataset::new(
            grid,
            Channel::LoadVelocity,
            vec![("a".into(), response.clone()), ("b".into(), response)],
        )
        .unwrap();
        let cp2 = assemble(&two, &spec, &lin, orders).unwrap();
        // Doubling configurations doubles per-point blocks, not the
        // auxiliary ones.
        assert_eq!(cp2.program.soc.len(), 2 * 9 + 2);
        assert_eq!(cp2.program.nonneg.len(), 2 * 6 + 6);
    }

    #[test]
    fn solve_feasible_and_contradictory_programs() {
        let dataset = rigid_dataset(25);
        let spec = WeightSpec {
            sigma: 0.01,
            ..WeightSpec::default()
        };
        let orders = Orders { qn: 3, qd: 3 };
        let lin = LinearizationPoint::initial(orders);
        let cp = assemble(&dataset, &spec, &lin, orders).unwrap();
        let (report, cand) = solve(&cp, &ClarabelSolver);
        assert_eq!(report.status, SolveStatus::Optimal);
        assert!(cand.is_some());
        assert!(report.max_violation <= RESIDUAL_TOL);
        // Every block is represented in the residual report.
        assert_eq!(
            report.residuals.len(),
            cp.program.nonneg.len() + cp.program.soc.len()
        );
        // Re-solving reproduces the objective exactly (determinism).
        let (again, _) = solve(&cp, &ClarabelSolver);
        assert!((again.objective - report.objective).abs() < 1e-8);

        // Contradiction: a tiny m_c makes the auxiliary roll-off block cap
        // M near zero; demanding M >= 0.5 on top is infeasible.
        let tight = LinearizationPoint {
            m_c: 1e-6,
            ..LinearizationPoint::initial(orders)
        };
        let mut cp_bad = assemble(&dataset, &spec, &tight, orders).unwrap();
        cp_bad
            .program
            .nonneg
            .push(AffineExpr::variable(cp_bad.layout.m_var(), 1.0, -0.5));
        cp_bad.nonneg_tags.push(BlockTag {
            kind: BlockKind::Bound,
            config: None,
            grid: None,
        });
        let (bad, none) = solve(&cp_bad, &ClarabelSolver);
        assert_eq!(bad.status, SolveStatus::Infeasible);
        assert!(none.is_none());
    }

    #[test]
    fn scp_converges_on_the_rigid_surrogate() {
        let dataset = rigid_dataset(160);
        let spec = WeightSpec::default();
        let result = synthesize(
            &dataset,
            &spec,
            Orders::default(),
            SynthOptions::default(),
            &ClarabelSolver,
        )
        .unwrap();
        assert!(result.converged, "SCP failed to converge");
        assert!(
            result.iterations <= 45,
            "took {} iterations",
            result.iterations
        );
        // Objective trace is non-decreasing within solver tolerance.
        for pair in result.objective_trace.windows(2) {
            assert!(
                pair[1] >= pair[0] - 1e-6,
                "objective regressed: {} -> {}",
                pair[0],
                pair[1]
            );
        }
        // Replay of the exact constraints.
        assert!(result.replay.w1_s <= 1.0 + 1e-6, "w1s = {}", result.replay.w1_s);
        assert!(result.replay.w2_s <= 1.0 + 1e-6, "w2s = {}", result.replay.w2_s);
        assert!(result.replay.w3_t <= 1.0 + 1e-6, "w3t = {}", result.replay.w3_t);
        // Auxiliary-variable consistency at the solution.
        assert!(result.gamma1 <= result.perf.zeta.powi(-2) + 1e-9);
        assert!(result.gamma2 <= result.perf.m_var.powi(-2) + 1e-9);
        // Normalisation convention.
        let peak = result.params.t().iter().fold(0.0f64, |m, &c| m.max(c.abs()));
        assert!((peak - 1.0).abs() < 1e-12);
        // A meaningful bandwidth was reached (well past the seed).
        assert!(result.perf.zeta > 2.0 * std::f64::consts::PI * 1.0);
    }

    #[test]
    fn scp_handles_a_single_point_grid() {
        let full = rigid_dataset(25);
        let dataset = full.select(&[12]).unwrap();
        let result = synthesize(
            &dataset,
            &WeightSpec::default(),
            Orders { qn: 2, qd: 2 },
            SynthOptions::default(),
            &ClarabelSolver,
        )
        .unwrap();
        assert!(result.converged);
    }

    #[test]
    fn scp_succeeds_on_a_flexible_plant() {
        let dataset = flexible_dataset();
        let result = synthesize(
            &dataset,
            &WeightSpec::default(),
            Orders::default(),
            SynthOptions::default(),
            &ClarabelSolver,
        )
        .unwrap();
        assert!(result.replay.w1_s <= 1.0 + 1e-6);
        assert!(result.replay.w2_s <= 1.0 + 1e-6);
        assert!(result.replay.w3_t <= 1.0 + 1e-6);
        assert!(
            result.perf.zeta > 2.0 * std::f64::consts::PI,
            "bandwidth stayed at {} rad/s",
            result.perf.zeta
        );
    }

    #[test]
    fn infeasible_start_reports_violated_blocks() {
        // An absurd W3 corner makes the bandwidth cap zeta < tau^{-1}
        // drop below the strict-positivity floor tied to the seed, so the
        // very first program has an empty feasible set.
        let dataset = rigid_dataset(25);
        let spec = WeightSpec {
            tau: 1e10,
            order: 1,
            ..WeightSpec::default()
        };
        let err = synthesize(
            &dataset,
            &spec,
            Orders::default(),
            SynthOptions::default(),
            &ClarabelSolver,
        )
        .unwrap_err();
        match err {
            ConvexifyError::Infeasible { .. } => {}
            other => panic!("expected infeasibility, got {other}"),
        }
    }

    #[test]
    fn result_file_round_trips() {
        let dataset = rigid_dataset(30);
        let result = synthesize(
            &dataset,
            &WeightSpec::default(),
            Orders { qn: 4, qd: 4 },
            SynthOptions::default(),
            &ClarabelSolver,
        )
        .unwrap();
        let dir = std::env::temp_dir().join(format!("dobsyn-cvx-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("result.json");
        save_result(&result, &path).unwrap();
        let back = load_result(&path).unwrap();
        assert_eq!(result.params, back.params);
        assert_eq!(result.perf, back.perf);
        assert_eq!(result.objective_trace, back.objective_trace);
        assert_eq!(result.iterates, back.iterates);
        fs::remove_dir_all(&dir).ok();
    }
}
