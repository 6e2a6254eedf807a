//! Decision sets as finite unions of conic-representable convex pieces.
//!
//! Each piece is `{x : A·x + b ∈ K}` for a product cone `K`. Optimizing a
//! linear objective over the convex hull of the union is lifted into a single
//! conic program through the perspective of every piece: with one copy
//! `xᵢ` and one weight `αᵢ` per piece, `A·xᵢ + αᵢ·b ∈ K` is the closed
//! perspective of the piece's constraints, and `z = Σ xᵢ` ranges over the
//! hull when `α` ranges over the simplex.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::conic::{
    solve_conic, Cone, ConeConstraint, ConicProgram, ConicSolution, SolverTolerances,
};
use crate::{Error, Result};

/// Membership tolerance used when validating points that came out of a solve.
pub const MEMBERSHIP_TOL: f64 = 1e-6;
/// Mixture weights at or below this are dropped.
pub const EPS_ALPHA: f64 = 1e-9;

/// External description of one convex piece.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum PieceSpec {
    /// Euclidean ball `‖x − center‖ ≤ radius`.
    Ball { center: Vec<f64>, radius: f64 },
    /// Axis-aligned box; `lower[j] == upper[j]` pins a coordinate.
    Box { lower: Vec<f64>, upper: Vec<f64> },
    /// `{x : A·x ≤ b}`, `A` given row-major.
    Polytope { a: Vec<Vec<f64>>, b: Vec<f64> },
}

impl PieceSpec {
    pub fn point(p: &[f64]) -> Self {
        PieceSpec::Box {
            lower: p.to_vec(),
            upper: p.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            PieceSpec::Ball { center, .. } => center.len(),
            PieceSpec::Box { lower, .. } => lower.len(),
            PieceSpec::Polytope { a, .. } => a.first().map_or(0, Vec::len),
        }
    }

    /// The conic blocks `A·x + b ∈ K` describing the piece.
    fn blocks(&self) -> Result<Vec<ConeConstraint>> {
        let d = self.dim();
        if d == 0 {
            return Err(Error::InvalidInput("piece of dimension 0".into()));
        }
        match self {
            PieceSpec::Ball { center, radius } => {
                if !(*radius >= 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "negative ball radius {radius}"
                    )));
                }
                let c = DVector::from_column_slice(center);
                if *radius == 0.0 {
                    return Ok(vec![ConeConstraint::new(
                        DMatrix::identity(d, d),
                        -c,
                        Cone::Zero(d),
                    )]);
                }
                // (r, x − c) ∈ SOC
                let mut a = DMatrix::zeros(d + 1, d);
                a.view_mut((1, 0), (d, d)).fill_with_identity();
                let mut b = DVector::zeros(d + 1);
                b[0] = *radius;
                b.rows_mut(1, d).copy_from(&(-c));
                Ok(vec![ConeConstraint::new(a, b, Cone::SecondOrder(d + 1))])
            }
            PieceSpec::Box { lower, upper } => {
                if upper.len() != d {
                    return Err(Error::dim("box upper", d, upper.len()));
                }
                let mut pinned = Vec::new();
                let mut free = Vec::new();
                for j in 0..d {
                    if !(lower[j] <= upper[j]) {
                        return Err(Error::InvalidInput(format!(
                            "box lower {} exceeds upper {} in coordinate {j}",
                            lower[j], upper[j]
                        )));
                    }
                    if lower[j] == upper[j] {
                        pinned.push(j);
                    } else {
                        free.push(j);
                    }
                }
                let mut blocks = Vec::new();
                if !pinned.is_empty() {
                    let mut a = DMatrix::zeros(pinned.len(), d);
                    let mut b = DVector::zeros(pinned.len());
                    for (r, &j) in pinned.iter().enumerate() {
                        a[(r, j)] = 1.0;
                        b[r] = -lower[j];
                    }
                    blocks.push(ConeConstraint::new(a, b, Cone::Zero(pinned.len())));
                }
                if !free.is_empty() {
                    let rows = 2 * free.len();
                    let mut a = DMatrix::zeros(rows, d);
                    let mut b = DVector::zeros(rows);
                    for (r, &j) in free.iter().enumerate() {
                        // x_j − l_j ≥ 0 and u_j − x_j ≥ 0
                        a[(2 * r, j)] = 1.0;
                        b[2 * r] = -lower[j];
                        a[(2 * r + 1, j)] = -1.0;
                        b[2 * r + 1] = upper[j];
                    }
                    blocks.push(ConeConstraint::new(a, b, Cone::Nonnegative(rows)));
                }
                Ok(blocks)
            }
            PieceSpec::Polytope { a, b } => {
                if a.len() != b.len() || a.is_empty() {
                    return Err(Error::InvalidInput(format!(
                        "polytope has {} rows in A and {} entries in b",
                        a.len(),
                        b.len()
                    )));
                }
                if let Some(row) = a.iter().find(|r| r.len() != d) {
                    return Err(Error::dim("polytope row", d, row.len()));
                }
                let m = DMatrix::from_fn(a.len(), d, |r, j| -a[r][j]);
                Ok(vec![ConeConstraint::new(
                    m,
                    DVector::from_column_slice(b),
                    Cone::Nonnegative(a.len()),
                )])
            }
        }
    }

    /// Exact `max ‖x‖` over the piece when it has a closed form.
    fn exact_norm_bound(&self) -> Option<f64> {
        match self {
            PieceSpec::Ball { center, radius } => {
                Some(center.iter().map(|v| v * v).sum::<f64>().sqrt() + radius)
            }
            PieceSpec::Box { lower, upper } => Some(
                lower
                    .iter()
                    .zip(upper)
                    .map(|(l, u)| l.abs().max(u.abs()).powi(2))
                    .sum::<f64>()
                    .sqrt(),
            ),
            PieceSpec::Polytope { .. } => None,
        }
    }
}

/// One nonempty, bounded convex piece `{x : A·x + b ∈ K}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConicPiece {
    dim: usize,
    blocks: Vec<ConeConstraint>,
    /// Per-coordinate `(min, max)` over the piece.
    bounds: Vec<(f64, f64)>,
    norm_bound: f64,
    spec: Option<PieceSpec>,
}

impl ConicPiece {
    pub fn from_spec(spec: &PieceSpec) -> Result<Self> {
        let mut piece = Self::from_blocks(spec.dim(), spec.blocks()?)?;
        if let Some(exact) = spec.exact_norm_bound() {
            piece.norm_bound = piece.norm_bound.min(exact);
        }
        piece.spec = Some(spec.clone());
        Ok(piece)
    }

    /// Builds a piece from raw conic blocks, checking nonemptiness with one
    /// feasibility solve and boundedness with `2d` support-function solves.
    pub fn from_blocks(dim: usize, blocks: Vec<ConeConstraint>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidInput("piece without constraints".into()));
        }
        let tol = SolverTolerances::default();
        let mut prog = ConicProgram::new(dim, DVector::zeros(dim));
        prog.constraints = blocks.clone();
        prog.validate()?;

        let feasible = solve_conic(&prog, &tol)?;
        if !feasible.is_optimal() {
            return Err(Error::InvalidInput(format!(
                "decision-set piece is empty ({:?})",
                feasible.status
            )));
        }

        let mut bounds = Vec::with_capacity(dim);
        for j in 0..dim {
            let mut extent = [0.0; 2];
            for (slot, sign) in [(0, -1.0), (1, 1.0)] {
                prog.objective = DVector::zeros(dim);
                prog.objective[j] = sign;
                let sol = solve_conic(&prog, &tol)?;
                let (_, value) = sol.into_optimal("support function").map_err(|e| match e {
                    Error::Unbounded(_) => Error::InvalidInput(format!(
                        "decision-set piece is unbounded along coordinate {j}"
                    )),
                    other => other,
                })?;
                extent[slot] = sign * value;
            }
            bounds.push((extent[0], extent[1]));
        }
        let norm_bound = bounds
            .iter()
            .map(|(l, u)| l.abs().max(u.abs()).powi(2))
            .sum::<f64>()
            .sqrt();

        Ok(ConicPiece {
            dim,
            blocks,
            bounds,
            norm_bound,
            spec: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn blocks(&self) -> &[ConeConstraint] {
        &self.blocks
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    /// Upper bound on `‖x‖` over the piece.
    pub fn norm_bound(&self) -> f64 {
        self.norm_bound
    }

    pub fn spec(&self) -> Option<&PieceSpec> {
        self.spec.as_ref()
    }

    pub fn violation(&self, x: &DVector<f64>) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.violation(x))
            .fold(0.0, f64::max)
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        self.violation(x) <= tol
    }

    /// Euclidean projection of `x` onto the piece.
    pub fn project(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let d = self.dim;
        // variables (y, t): maximize −t s.t. (t, y − x) ∈ SOC, y ∈ piece
        let mut objective = DVector::zeros(d + 1);
        objective[d] = -1.0;
        let mut prog = ConicProgram::new(d + 1, objective);
        let mut a = DMatrix::zeros(d + 1, d + 1);
        a[(0, d)] = 1.0;
        a.view_mut((1, 0), (d, d)).fill_with_identity();
        let mut b = DVector::zeros(d + 1);
        b.rows_mut(1, d).copy_from(&(-x));
        prog.push(a, b, Cone::SecondOrder(d + 1));
        for blk in &self.blocks {
            let mut wide = DMatrix::zeros(blk.a.nrows(), d + 1);
            wide.view_mut((0, 0), (blk.a.nrows(), d)).copy_from(&blk.a);
            prog.push(wide, blk.b.clone(), blk.cone);
        }
        let (point, _) = solve_conic(&prog, &SolverTolerances::default())?
            .into_optimal("projection onto piece")?;
        Ok(point.rows(0, d).into_owned())
    }
}

/// A union of convex pieces together with a known safe action.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionSet {
    pieces: Vec<ConicPiece>,
    dim: usize,
    safe_action: DVector<f64>,
    norm_bound: f64,
}

impl DecisionSet {
    pub fn new(pieces: Vec<ConicPiece>, safe_action: DVector<f64>) -> Result<Self> {
        let Some(first) = pieces.first() else {
            return Err(Error::InvalidInput(
                "decision set needs at least one piece".into(),
            ));
        };
        let dim = first.dim();
        if let Some(p) = pieces.iter().find(|p| p.dim() != dim) {
            return Err(Error::dim("decision-set piece", dim, p.dim()));
        }
        if safe_action.len() != dim {
            return Err(Error::dim("safe action", dim, safe_action.len()));
        }
        let norm_bound = pieces
            .iter()
            .map(ConicPiece::norm_bound)
            .fold(0.0, f64::max);
        let set = DecisionSet {
            pieces,
            dim,
            safe_action,
            norm_bound,
        };
        if !set.contains(&set.safe_action, MEMBERSHIP_TOL)? {
            return Err(Error::InvalidInput(
                "safe action is not a member of the decision set".into(),
            ));
        }
        Ok(set)
    }

    pub fn from_specs(specs: &[PieceSpec], safe_action: &[f64]) -> Result<Self> {
        let pieces = specs
            .iter()
            .map(ConicPiece::from_spec)
            .collect::<Result<Vec<_>>>()?;
        Self::new(pieces, DVector::from_column_slice(safe_action))
    }

    pub fn pieces(&self) -> &[ConicPiece] {
        &self.pieces
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn safe_action(&self) -> &DVector<f64> {
        &self.safe_action
    }

    /// `L`: an upper bound on `‖x‖` over the whole set.
    pub fn norm_bound(&self) -> f64 {
        self.norm_bound
    }

    /// Whether some piece contains `x` within `tol`.
    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> Result<bool> {
        if x.len() != self.dim {
            return Err(Error::dim("membership query", self.dim, x.len()));
        }
        Ok(self.pieces.iter().any(|p| p.contains(x, tol)))
    }
}

/// `‖M·z‖₂ + gᵀz ≤ t` on the hull variable.
#[derive(Debug, Clone, PartialEq)]
pub struct SocBound {
    pub m: DMatrix<f64>,
    pub g: DVector<f64>,
    pub t: f64,
}

/// `aᵀz ≤ t` on the hull variable.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearBound {
    pub a: DVector<f64>,
    pub t: f64,
}

/// Perspective lift of `max objectiveᵀz over Co(set) ∩ extras`.
///
/// Variables are stacked as `[z, x₁, …, x_k, α₁, …, α_k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HullLift {
    pub program: ConicProgram,
    dim: usize,
    pieces: usize,
}

impl HullLift {
    pub fn z_range(&self) -> std::ops::Range<usize> {
        0..self.dim
    }

    pub fn x_range(&self, piece: usize) -> std::ops::Range<usize> {
        let start = self.dim * (1 + piece);
        start..start + self.dim
    }

    pub fn alpha_index(&self, piece: usize) -> usize {
        self.dim * (1 + self.pieces) + piece
    }

    pub fn num_pieces(&self) -> usize {
        self.pieces
    }

    pub fn z(&self, point: &DVector<f64>) -> DVector<f64> {
        point.rows(0, self.dim).into_owned()
    }
}

pub fn hull_lift(
    set: &DecisionSet,
    objective: &DVector<f64>,
    extra_linear: &[LinearBound],
    extra_soc: &[SocBound],
) -> Result<HullLift> {
    let d = set.dim();
    let k = set.pieces().len();
    if objective.len() != d {
        return Err(Error::dim("hull objective", d, objective.len()));
    }
    let n = d * (1 + k) + k;
    let lift_shape = HullLift {
        program: ConicProgram::new(n, DVector::zeros(n)),
        dim: d,
        pieces: k,
    };

    let mut c = DVector::zeros(n);
    c.rows_mut(0, d).copy_from(objective);
    let mut prog = ConicProgram::new(n, c);

    // z − Σ xᵢ = 0
    let mut a = DMatrix::zeros(d, n);
    a.view_mut((0, 0), (d, d)).fill_with_identity();
    for i in 0..k {
        let r = lift_shape.x_range(i);
        a.view_mut((0, r.start), (d, d)).fill_diagonal(-1.0);
    }
    prog.push(a, DVector::zeros(d), Cone::Zero(d));

    // Σ αᵢ − 1 = 0 and α ≥ 0
    let mut sum = DMatrix::zeros(1, n);
    let mut nonneg = DMatrix::zeros(k, n);
    for i in 0..k {
        sum[(0, lift_shape.alpha_index(i))] = 1.0;
        nonneg[(i, lift_shape.alpha_index(i))] = 1.0;
    }
    prog.push(sum, DVector::from_element(1, -1.0), Cone::Zero(1));
    prog.push(nonneg, DVector::zeros(k), Cone::Nonnegative(k));

    // Aᵢ·xᵢ + αᵢ·bᵢ ∈ Kᵢ
    for (i, piece) in set.pieces().iter().enumerate() {
        let xr = lift_shape.x_range(i);
        let ai = lift_shape.alpha_index(i);
        for blk in piece.blocks() {
            let rows = blk.a.nrows();
            let mut a = DMatrix::zeros(rows, n);
            a.view_mut((0, xr.start), (rows, d)).copy_from(&blk.a);
            a.view_mut((0, ai), (rows, 1)).copy_from(&blk.b);
            prog.push(a, DVector::zeros(rows), blk.cone);
        }
    }

    if !extra_linear.is_empty() {
        let rows = extra_linear.len();
        let mut a = DMatrix::zeros(rows, n);
        let mut b = DVector::zeros(rows);
        for (r, lb) in extra_linear.iter().enumerate() {
            if lb.a.len() != d {
                return Err(Error::dim("linear bound", d, lb.a.len()));
            }
            for j in 0..d {
                a[(r, j)] = -lb.a[j];
            }
            b[r] = lb.t;
        }
        prog.push(a, b, Cone::Nonnegative(rows));
    }

    for soc in extra_soc {
        if soc.m.ncols() != d || soc.g.len() != d {
            return Err(Error::dim("SOC bound", d, soc.m.ncols().min(soc.g.len())));
        }
        let rows = 1 + soc.m.nrows();
        let mut a = DMatrix::zeros(rows, n);
        let mut b = DVector::zeros(rows);
        // (t − gᵀz, M·z) ∈ SOC
        for j in 0..d {
            a[(0, j)] = -soc.g[j];
        }
        b[0] = soc.t;
        a.view_mut((1, 0), (soc.m.nrows(), d)).copy_from(&soc.m);
        prog.push(a, b, Cone::SecondOrder(rows));
    }

    Ok(HullLift {
        program: prog,
        ..lift_shape
    })
}

/// A finite-support mixture: `(point, weight)` pairs with weights summing
/// to one.
pub type Mixture = Vec<(DVector<f64>, f64)>;

/// Recovers `z* = Σ αᵢ·(xᵢ/αᵢ)` from an optimal lifted solution.
///
/// Pieces with `αᵢ ≤ eps_alpha` are dropped and the remaining weights
/// renormalized. A recovered point that misses its piece by more than
/// [`MEMBERSHIP_TOL`] (division by a small weight amplifies solver error) is
/// replaced by its projection onto the piece.
pub fn extract_mixture(
    set: &DecisionSet,
    lift: &HullLift,
    solution: &ConicSolution,
    eps_alpha: f64,
) -> Result<Mixture> {
    let Some(point) = solution.point.as_ref().filter(|_| solution.is_optimal()) else {
        return Err(Error::InvalidInput(
            "mixture extraction needs an optimal solution".into(),
        ));
    };
    if point.len() != lift.program.num_vars || lift.num_pieces() != set.pieces().len() {
        return Err(Error::dim(
            "lifted solution",
            lift.program.num_vars,
            point.len(),
        ));
    }

    let mut mixture = Vec::new();
    for (i, piece) in set.pieces().iter().enumerate() {
        let alpha = point[lift.alpha_index(i)];
        if alpha <= eps_alpha {
            continue;
        }
        let r = lift.x_range(i);
        let mut x = point.rows(r.start, r.len()) / alpha;
        if !piece.contains(&x, MEMBERSHIP_TOL) {
            x = piece.project(&x)?;
        }
        mixture.push((x, alpha));
    }
    let total: f64 = mixture.iter().map(|(_, w)| w).sum();
    if mixture.is_empty() || total <= 0.0 {
        return Err(Error::NumericalFailure(
            "every mixture weight fell below the extraction threshold".into(),
        ));
    }
    for (_, w) in &mut mixture {
        *w /= total;
    }
    Ok(mixture)
}

/// `Σ wᵢ·pᵢ`.
pub fn mixture_mean(mixture: &[(DVector<f64>, f64)]) -> DVector<f64> {
    let d = mixture.first().map_or(0, |(p, _)| p.len());
    mixture
        .iter()
        .fold(DVector::zeros(d), |acc, (p, w)| acc + p * *w)
}
