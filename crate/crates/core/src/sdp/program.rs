use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sym_eigvals, SymMatrix};
use crate::generators::{Instance, InstanceSpec, ModelParams};
use crate::model::{t1_cbm, t1_sbm, t2_noisy, tilde_y, GraphKind, LabelVector, SideInfo, SideParams, WeightedGraph};
use crate::scalar::Scalar;

/// The six relaxations: graph model crossed with side-information family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// V1: Z ⪰ 0, Z_ii = 1, ⟨Z, W⟩ = (YᵀY)².
    CbmPartial,
    /// V2: H = [[1, Xᵀ], [X, Z]] ⪰ 0 with noisy-label linear term.
    CbmNoisy,
    /// V3: as V2 with the feature log-likelihood vector Ỹ.
    CbmGeneral,
    /// V4: V1 plus ⟨J, Z⟩ = 0.
    SbmPartial,
    /// V5: V2 plus ⟨J, Z⟩ = 0.
    SbmNoisy,
    /// V6: V3 plus ⟨J, Z⟩ = 0.
    SbmGeneral,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::CbmPartial,
        Variant::CbmNoisy,
        Variant::CbmGeneral,
        Variant::SbmPartial,
        Variant::SbmNoisy,
        Variant::SbmGeneral,
    ];

    /// True for the lifted (n+1)-dimensional programs.
    pub fn is_lifted(self) -> bool {
        !matches!(self, Variant::CbmPartial | Variant::SbmPartial)
    }

    pub fn is_balanced(self) -> bool {
        matches!(self, Variant::SbmPartial | Variant::SbmNoisy | Variant::SbmGeneral)
    }

    pub fn graph_kind(self) -> GraphKind {
        if self.is_balanced() {
            GraphKind::Sbm
        } else {
            GraphKind::Cbm
        }
    }

    /// Offset of the Z block inside the program matrix.
    pub fn z_offset(self) -> usize {
        usize::from(self.is_lifted())
    }
}

/// Linear functional ⟨A, X⟩ with A either a diagonal unit or rank one.
#[derive(Clone, Debug, PartialEq)]
pub enum Constraint<T> {
    /// A = e_i e_iᵀ.
    Entry(usize),
    /// A = v vᵀ.
    Rank1(Vec<T>),
}

impl<T: Scalar> Constraint<T> {
    pub fn apply(&self, x: &SymMatrix<T>) -> T {
        match self {
            Constraint::Entry(i) => x.get(*i, *i),
            Constraint::Rank1(v) => x.quad_form(v),
        }
    }

    /// `x += y * A`.
    pub fn add_scaled_to(&self, y: T, x: &mut SymMatrix<T>) {
        match self {
            Constraint::Entry(i) => x[(*i, *i)] += y,
            Constraint::Rank1(v) => x.rank1_update(y, v),
        }
    }

    /// ⟨A, B⟩ for two constraint matrices.
    pub fn inner(&self, other: &Self) -> T {
        match (self, other) {
            (Constraint::Entry(i), Constraint::Entry(j)) => {
                if i == j {
                    T::one()
                } else {
                    T::zero()
                }
            }
            (Constraint::Entry(i), Constraint::Rank1(v)) | (Constraint::Rank1(v), Constraint::Entry(i)) => v[*i] * v[*i],
            (Constraint::Rank1(v), Constraint::Rank1(w)) => {
                let d: T = v.iter().zip(w).map(|(&a, &b)| a * b).sum();
                d * d
            }
        }
    }

    pub fn to_matrix(&self, dim: usize) -> SymMatrix<T> {
        let mut m = SymMatrix::zeros(dim);
        self.add_scaled_to(T::one(), &mut m);
        m
    }
}

/// Largest accepted condition number of the constraint Gram matrix.
pub const MAX_GRAM_CONDITION: f64 = 1e12;

/// maximize ⟨C, X⟩ subject to ⟨A_k, X⟩ = b_k, X ⪰ 0.
#[derive(Clone, Debug, PartialEq)]
pub struct SdpProgram<T> {
    pub variant: Variant,
    /// Node count; the matrix dimension is `n` or `n + 1`.
    pub n: usize,
    pub cost: SymMatrix<T>,
    pub constraints: Vec<(Constraint<T>, T)>,
    /// No revealed label breaks the global sign symmetry (partial variants).
    pub sign_ambiguous: bool,
}

impl<T: Scalar> SdpProgram<T> {
    pub fn dim(&self) -> usize {
        self.cost.n()
    }

    /// Program matrix of a ±1 labeling: x xᵀ, or [[1, xᵀ], [x, x xᵀ]].
    pub fn embed(&self, x: &LabelVector) -> SymMatrix<T> {
        let xr = x.to_real::<T>();
        if self.variant.is_lifted() {
            let mut h = Vec::with_capacity(self.n + 1);
            h.push(T::one());
            h.extend(xr);
            SymMatrix::outer(&h)
        } else {
            SymMatrix::outer(&xr)
        }
    }

    pub fn objective(&self, x: &SymMatrix<T>) -> T {
        self.cost.dot(x)
    }

    /// Max-abs constraint violation.
    pub fn constraint_violation(&self, x: &SymMatrix<T>) -> T {
        self.constraints
            .iter()
            .map(|(c, b)| (c.apply(x) - *b).abs())
            .fold(T::zero(), T::max)
    }

    /// ‖𝒜(X) − b‖₂.
    pub fn constraint_residual(&self, x: &SymMatrix<T>) -> T {
        self.constraints
            .iter()
            .map(|(c, b)| {
                let r = c.apply(x) - *b;
                r * r
            })
            .sum::<T>()
            .sqrt()
    }

    pub fn b_norm(&self) -> T {
        self.constraints.iter().map(|(_, b)| *b * *b).sum::<T>().sqrt()
    }

    /// Gram matrix ⟨A_i, A_j⟩.
    pub fn gram(&self) -> SymMatrix<T> {
        let m = self.constraints.len();
        SymMatrix::from_fn(m, |i, j| self.constraints[i].0.inner(&self.constraints[j].0))
    }

    /// Checks shapes and linear independence of the constraints.
    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        let has_all_diag = (0..d).all(|i| {
            self.constraints
                .iter()
                .any(|(c, b)| matches!(c, Constraint::Entry(j) if *j == i) && *b == T::one())
        });
        if !has_all_diag {
            return Err(Error::param("every diagonal entry must be pinned to 1"));
        }
        for (c, _) in &self.constraints {
            match c {
                Constraint::Entry(i) if *i >= d => return Err(Error::Dimension { expected: d, found: *i }),
                Constraint::Rank1(v) if v.len() != d => {
                    return Err(Error::Dimension {
                        expected: d,
                        found: v.len(),
                    })
                }
                _ => {}
            }
        }
        let cond = gram_condition(&self.gram())?;
        if !(cond <= MAX_GRAM_CONDITION) {
            return Err(Error::SingularConstraints(cond));
        }
        Ok(())
    }
}

fn gram_condition<T: Scalar>(g: &SymMatrix<T>) -> Result<f64> {
    if g.n() == 0 {
        return Ok(1.0);
    }
    let ev = sym_eigvals(g)?;
    let (lo, hi) = (ev[0].to_f64_lossy(), ev[ev.len() - 1].to_f64_lossy());
    Ok(if lo <= 0.0 { f64::INFINITY } else { hi / lo })
}

fn diag_constraints<T: Scalar>(d: usize) -> Vec<(Constraint<T>, T)> {
    (0..d).map(|i| (Constraint::Entry(i), T::one())).collect()
}

fn erasure_values<T: Scalar>(side: &SideInfo, n: usize) -> Result<Vec<T>> {
    side.validate(n)?;
    match side {
        SideInfo::Erasure { .. } => Ok(side.values_real().unwrap()),
        _ => Err(Error::param("partial-label program needs erasure side information")),
    }
}

fn check_graph(g: &WeightedGraph, kind: GraphKind) -> Result<()> {
    if g.kind() != kind {
        return Err(Error::param(format!("expected a {kind:?} graph, got {:?}", g.kind())));
    }
    Ok(())
}

fn build_partial<T: Scalar>(variant: Variant, g: &WeightedGraph, side: &SideInfo) -> Result<SdpProgram<T>> {
    let n = g.n();
    let y = erasure_values::<T>(side, n)?;
    let mut constraints = diag_constraints::<T>(n);
    let revealed = y.iter().filter(|&&v| v != T::zero()).count();
    if variant.is_balanced() {
        constraints.push((Constraint::Rank1(vec![T::one(); n]), T::zero()));
    }
    // With one revealed label, W = e_k e_kᵀ repeats the diagonal constraint.
    if revealed >= 2 {
        let r = T::from_usize_lossy(revealed);
        constraints.push((Constraint::Rank1(y), r * r));
    }
    Ok(SdpProgram {
        variant,
        n,
        cost: g.to_matrix(),
        constraints,
        sign_ambiguous: revealed == 0,
    })
}

fn build_lifted<T: Scalar>(variant: Variant, g: &WeightedGraph, t1: T, lin: &[T]) -> Result<SdpProgram<T>> {
    let n = g.n();
    if lin.len() != n {
        return Err(Error::Dimension {
            expected: n,
            found: lin.len(),
        });
    }
    let mut cost = SymMatrix::zeros(n + 1);
    for i in 0..n {
        cost.set(0, i + 1, lin[i]);
        for j in 0..n {
            let w = g.get(i, j);
            if w != 0 {
                cost[(i + 1, j + 1)] = t1 * T::from_i8(w).unwrap();
            }
        }
    }
    let mut constraints = diag_constraints::<T>(n + 1);
    if variant.is_balanced() {
        let mut v = vec![T::one(); n + 1];
        v[0] = T::zero();
        constraints.push((Constraint::Rank1(v), T::zero()));
    }
    Ok(SdpProgram {
        variant,
        n,
        cost,
        constraints,
        sign_ambiguous: false,
    })
}

fn noisy_vector<T: Scalar>(side: &SideInfo, n: usize, t2: T) -> Result<Vec<T>> {
    side.validate(n)?;
    match side {
        SideInfo::Noisy { values } => Ok(values.iter().map(|&v| t2 * T::from_i8(v).unwrap()).collect()),
        _ => Err(Error::param("noisy-label program needs noisy side information")),
    }
}

fn general_vector<T: Scalar>(side: &SideInfo, n: usize) -> Result<Vec<T>> {
    side.validate(n)?;
    tilde_y(side)
}

fn check_coefs<T: Scalar>(t1: T, t2: Option<T>) -> Result<()> {
    if !(t1 >= T::zero() && t1.is_finite()) {
        return Err(Error::param(format!("T1 must be finite and >= 0, got {t1}")));
    }
    if let Some(t2) = t2 {
        if !(t2 >= T::zero() && t2.is_finite()) {
            return Err(Error::param(format!("T2 must be finite and >= 0, got {t2}")));
        }
    }
    Ok(())
}

/// V1. The W-constraint is dropped when fewer than two labels are revealed.
pub fn build_cbm_partial<T: Scalar>(g: &WeightedGraph, side: &SideInfo) -> Result<SdpProgram<T>> {
    check_graph(g, GraphKind::Cbm)?;
    build_partial(Variant::CbmPartial, g, side)
}

/// V2. Cost [[0, T₂Yᵀ], [T₂Y, T₁G]].
pub fn build_cbm_noisy<T: Scalar>(g: &WeightedGraph, side: &SideInfo, t1: T, t2: T) -> Result<SdpProgram<T>> {
    check_graph(g, GraphKind::Cbm)?;
    check_coefs(t1, Some(t2))?;
    build_lifted(Variant::CbmNoisy, g, t1, &noisy_vector(side, g.n(), t2)?)
}

/// V3. Cost [[0, Ỹᵀ], [Ỹ, T₁G]].
pub fn build_cbm_general<T: Scalar>(g: &WeightedGraph, side: &SideInfo, t1: T) -> Result<SdpProgram<T>> {
    check_graph(g, GraphKind::Cbm)?;
    check_coefs(t1, None)?;
    build_lifted(Variant::CbmGeneral, g, t1, &general_vector(side, g.n())?)
}

/// V4.
pub fn build_sbm_partial<T: Scalar>(g: &WeightedGraph, side: &SideInfo) -> Result<SdpProgram<T>> {
    check_graph(g, GraphKind::Sbm)?;
    build_partial(Variant::SbmPartial, g, side)
}

/// V5.
pub fn build_sbm_noisy<T: Scalar>(g: &WeightedGraph, side: &SideInfo, t1: T, t2: T) -> Result<SdpProgram<T>> {
    check_graph(g, GraphKind::Sbm)?;
    check_coefs(t1, Some(t2))?;
    build_lifted(Variant::SbmNoisy, g, t1, &noisy_vector(side, g.n(), t2)?)
}

/// V6.
pub fn build_sbm_general<T: Scalar>(g: &WeightedGraph, side: &SideInfo, t1: T) -> Result<SdpProgram<T>> {
    check_graph(g, GraphKind::Sbm)?;
    check_coefs(t1, None)?;
    build_lifted(Variant::SbmGeneral, g, t1, &general_vector(side, g.n())?)
}

/// Graph-only program: the partial-label program with every label erased.
pub fn build_graph_only<T: Scalar>(g: &WeightedGraph) -> Result<SdpProgram<T>> {
    let side = SideInfo::Erasure { values: vec![0; g.n()] };
    match g.kind() {
        GraphKind::Cbm => build_cbm_partial(g, &side),
        GraphKind::Sbm => build_sbm_partial(g, &side),
    }
}

/// Graph coefficient T₁ of a model at size `n`.
pub fn graph_coefficient<T: Scalar>(model: &ModelParams, n: usize) -> Result<T> {
    match model {
        ModelParams::Cbm(p) => t1_cbm(T::lit(p.xi)),
        ModelParams::Sbm(p) => {
            let (pp, q) = p.edge_probs(n)?;
            t1_sbm(T::lit(pp), T::lit(q))
        }
    }
}

/// The relaxation matching an instance's model and side information.
/// Without side information this is the graph-only program.
pub fn build_for_instance<T: Scalar>(spec: &InstanceSpec, inst: &Instance) -> Result<SdpProgram<T>> {
    let g = &inst.graph;
    let Some(side) = inst.side.as_ref() else {
        return build_graph_only(g);
    };
    let kind = spec.model.kind();
    match side {
        SideInfo::Erasure { .. } => match kind {
            GraphKind::Cbm => build_cbm_partial(g, side),
            GraphKind::Sbm => build_sbm_partial(g, side),
        },
        SideInfo::Noisy { .. } => {
            let Some(SideParams::Noisy { alpha }) = spec.side_params()? else {
                return Err(Error::param("noisy side information needs noisy side parameters"));
            };
            let t1 = graph_coefficient(&spec.model, spec.n)?;
            let t2 = t2_noisy(T::lit(alpha))?;
            match kind {
                GraphKind::Cbm => build_cbm_noisy(g, side, t1, t2),
                GraphKind::Sbm => build_sbm_noisy(g, side, t1, t2),
            }
        }
        SideInfo::General { .. } => {
            let t1 = graph_coefficient(&spec.model, spec.n)?;
            match kind {
                GraphKind::Cbm => build_cbm_general(g, side, t1),
                GraphKind::Sbm => build_sbm_general(g, side, t1),
            }
        }
    }
}

/// Dense matrix packed as base64 little-endian `f64`s, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PackedMatrix {
    pub n: usize,
    pub data: String,
}

impl PackedMatrix {
    pub fn pack<T: Scalar>(m: &SymMatrix<T>) -> Self {
        Self {
            n: m.n(),
            data: pack_f64(m.as_slice().iter().map(|v| v.to_f64_lossy())),
        }
    }

    pub fn unpack<T: Scalar>(&self) -> Result<SymMatrix<T>> {
        let v = unpack_f64(&self.data)?;
        SymMatrix::new(self.n, v.into_iter().map(T::lit).collect())
    }
}

pub(crate) fn pack_f64(values: impl Iterator<Item = f64>) -> String {
    let mut bytes = Vec::new();
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    B64.encode(bytes)
}

pub(crate) fn unpack_f64(s: &str) -> Result<Vec<f64>> {
    let bytes = B64.decode(s).map_err(|e| Error::Serde(e.to_string()))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Serde("packed length is not a multiple of 8".into()));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConstraintDump {
    Entry { index: usize, rhs: f64 },
    Rank1 { vector: String, rhs: f64 },
}

/// JSON interchange form of a program.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProgramDump {
    pub variant: Variant,
    pub n: usize,
    pub sign_ambiguous: bool,
    pub cost: PackedMatrix,
    pub constraints: Vec<ConstraintDump>,
}

impl<T: Scalar> SdpProgram<T> {
    pub fn to_dump(&self) -> ProgramDump {
        ProgramDump {
            variant: self.variant,
            n: self.n,
            sign_ambiguous: self.sign_ambiguous,
            cost: PackedMatrix::pack(&self.cost),
            constraints: self
                .constraints
                .iter()
                .map(|(c, b)| match c {
                    Constraint::Entry(i) => ConstraintDump::Entry {
                        index: *i,
                        rhs: b.to_f64_lossy(),
                    },
                    Constraint::Rank1(v) => ConstraintDump::Rank1 {
                        vector: pack_f64(v.iter().map(|x| x.to_f64_lossy())),
                        rhs: b.to_f64_lossy(),
                    },
                })
                .collect(),
        }
    }

    pub fn from_dump(d: &ProgramDump) -> Result<Self> {
        let constraints = d
            .constraints
            .iter()
            .map(|c| {
                Ok(match c {
                    ConstraintDump::Entry { index, rhs } => (Constraint::Entry(*index), T::lit(*rhs)),
                    ConstraintDump::Rank1 { vector, rhs } => (
                        Constraint::Rank1(unpack_f64(vector)?.into_iter().map(T::lit).collect()),
                        T::lit(*rhs),
                    ),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let p = Self {
            variant: d.variant,
            n: d.n,
            cost: d.cost.unpack()?,
            constraints,
            sign_ambiguous: d.sign_ambiguous,
        };
        p.validate()?;
        Ok(p)
    }
}
