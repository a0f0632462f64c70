//! End-to-end solves: configuration, the TT pipeline, error metrics, field
//! sampling and comparison against the full-grid reference.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use ttiga_tensor::{
    amen_solve, compression_ratio_matrix, compression_ratio_tensor, relative_residual, AmenOptions, TtMatrix, TtTensor,
};

use crate::assembly::{
    apply_dirichlet, assemble_load, assemble_stiffness, AssembledSystem, AssemblyOptions, BoundarySpec, CrossSummary,
    FaceCondition, ScalarFn,
};
use crate::discretization::Discretization;
use crate::error::{IgaError, Result};
use crate::geometry::{axial_radius, make_geometry, GeometryKind, GeometryPatch};
use crate::reference::{assemble_full, pcg, reduce, CsrMatrix};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    pub name: GeometryKind,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

/// One value for all directions, or one per direction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerDirection {
    Uniform(usize),
    Each([usize; 3]),
}

impl PerDirection {
    pub fn get(self) -> [usize; 3] {
        match self {
            PerDirection::Uniform(v) => [v; 3],
            PerDirection::Each(v) => v,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceSpec {
    Zero,
    /// `sin(πx) sin(πy)`
    SinXy,
    /// `sin(πx) sin(πy) sin(πz)`
    SinXyz,
    /// `3π² sin(πx) sin(πy) sin(πz)`, whose solution with zero boundary data on the unit cube is `sin sin sin`.
    CubeSine,
    Constant(f64),
}

impl SourceSpec {
    pub fn function(self) -> Box<ScalarFn<'static>> {
        match self {
            SourceSpec::Zero => Box::new(|_| 0.0),
            SourceSpec::SinXy => Box::new(|x: [f64; 3]| (PI * x[0]).sin() * (PI * x[1]).sin()),
            SourceSpec::SinXyz => Box::new(|x: [f64; 3]| (PI * x[0]).sin() * (PI * x[1]).sin() * (PI * x[2]).sin()),
            SourceSpec::CubeSine => {
                Box::new(|x: [f64; 3]| 3.0 * PI * PI * (PI * x[0]).sin() * (PI * x[1]).sin() * (PI * x[2]).sin())
            }
            SourceSpec::Constant(c) => Box::new(move |_| c),
        }
    }
}

/// Known exact solutions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalyticSpec {
    /// `sin(πx) sin(πy) / (2π²)`
    Lshape,
    /// Logarithmic radial profile between the constant values on the two radial faces.
    Ring,
    /// `sin(πx) sin(πy) sin(πz)`
    CubeSine,
}

impl AnalyticSpec {
    pub fn function(self, patch: &GeometryPatch, bc: &BoundarySpec) -> Result<Box<ScalarFn<'static>>> {
        Ok(match self {
            AnalyticSpec::Lshape => Box::new(|x: [f64; 3]| (PI * x[0]).sin() * (PI * x[1]).sin() / (2.0 * PI * PI)),
            AnalyticSpec::CubeSine => Box::new(|x: [f64; 3]| (PI * x[0]).sin() * (PI * x[1]).sin() * (PI * x[2]).sin()),
            AnalyticSpec::Ring => {
                if patch.kind != GeometryKind::Ring {
                    return Err(IgaError::Config("the ring solution needs the ring geometry".into()));
                }
                let (FaceCondition::Dirichlet(u_in), FaceCondition::Dirichlet(u_out)) = (bc.face(0, 0), bc.face(0, 1)) else {
                    return Err(IgaError::Config("the ring solution needs constant Dirichlet values on both radial faces".into()));
                };
                let (u_in, u_out) = (*u_in, *u_out);
                let (r_in, r_out) = (patch.params["r_in"], patch.params["r_out"]);
                let scale = (u_out - u_in) / (r_out / r_in).ln();
                Box::new(move |x: [f64; 3]| u_in + scale * (axial_radius(x) / r_in).ln())
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSettings {
    pub max_sweeps: usize,
    pub kick: usize,
    pub max_direct: usize,
    pub max_rank: Option<usize>,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let a = AmenOptions::default();
        SolverSettings { max_sweeps: a.max_sweeps, kick: a.kick, max_direct: a.max_direct, max_rank: None }
    }
}

fn default_degree() -> PerDirection {
    PerDirection::Uniform(2)
}
fn default_elements() -> PerDirection {
    PerDirection::Uniform(4)
}
fn default_eps_cross() -> f64 {
    1e-10
}
fn default_eps_solve() -> f64 {
    1e-8
}
fn default_eps_round() -> f64 {
    1e-10
}
fn default_rank_cap() -> usize {
    64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    #[serde(default)]
    pub label: Option<String>,
    pub geometry: GeometrySpec,
    #[serde(default = "default_degree")]
    pub degree: PerDirection,
    #[serde(default = "default_elements")]
    pub elements: PerDirection,
    /// Gauss points per knot span; defaults to `p + 1`.
    #[serde(default)]
    pub n_gauss: Option<PerDirection>,
    #[serde(default = "default_eps_cross")]
    pub eps_cross: f64,
    #[serde(default = "default_eps_solve")]
    pub eps_solve: f64,
    #[serde(default = "default_eps_round")]
    pub eps_round: f64,
    #[serde(default = "default_rank_cap")]
    pub rank_cap: usize,
    #[serde(default)]
    pub seed: u64,
    /// Boundary conditions; the geometry's standard setup when absent.
    #[serde(default)]
    pub boundary: Option<BoundarySpec>,
    /// Source term; with both `source` and `analytic` absent the geometry's standard problem is used.
    #[serde(default)]
    pub source: Option<SourceSpec>,
    #[serde(default)]
    pub analytic: Option<AnalyticSpec>,
    /// Parametric point at which the solution value is reported.
    #[serde(default)]
    pub probe: Option<[f64; 3]>,
    #[serde(default)]
    pub solver: SolverSettings,
}

/// Standard boundary conditions of each geometry.
pub fn default_boundary(kind: GeometryKind) -> BoundarySpec {
    let zero = FaceCondition::Dirichlet(0.0);
    let mut bc = BoundarySpec::all_natural();
    match kind {
        GeometryKind::UnitCube => bc = BoundarySpec::all(zero),
        GeometryKind::Lshape => {
            for dir in 0..2 {
                for side in 0..2 {
                    *bc.face_mut(dir, side) = zero.clone();
                }
            }
        }
        GeometryKind::Ring => {
            bc.xi1_min = FaceCondition::Dirichlet(1.0);
            bc.xi1_max = FaceCondition::Dirichlet(2.0);
        }
        GeometryKind::ClosedHemisphere | GeometryKind::OpenedHemisphere | GeometryKind::QuarterTorus => {
            bc.xi1_min = zero.clone();
            bc.xi1_max = zero;
        }
        GeometryKind::Hyperboloid => {
            bc.xi3_min = zero.clone();
            bc.xi3_max = zero;
        }
    }
    bc
}

/// Standard source and exact solution of each geometry.
pub fn default_problem(kind: GeometryKind) -> (SourceSpec, Option<AnalyticSpec>) {
    match kind {
        GeometryKind::UnitCube => (SourceSpec::CubeSine, Some(AnalyticSpec::CubeSine)),
        GeometryKind::Lshape => (SourceSpec::SinXy, Some(AnalyticSpec::Lshape)),
        GeometryKind::Ring => (SourceSpec::Zero, Some(AnalyticSpec::Ring)),
        _ => (SourceSpec::Constant(1.0), None),
    }
}

impl SolveConfig {
    /// Standard problem on `kind` with default settings.
    pub fn preset(kind: GeometryKind, degree: usize, elements: usize) -> Self {
        SolveConfig {
            label: None,
            geometry: GeometrySpec { name: kind, params: BTreeMap::new() },
            degree: PerDirection::Uniform(degree),
            elements: PerDirection::Uniform(elements),
            n_gauss: None,
            eps_cross: default_eps_cross(),
            eps_solve: default_eps_solve(),
            eps_round: default_eps_round(),
            rank_cap: default_rank_cap(),
            seed: 0,
            boundary: None,
            source: None,
            analytic: None,
            probe: (kind == GeometryKind::Ring).then_some([0.5, 0.125, 0.5]),
            solver: SolverSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.elements.get().iter().any(|&e| e == 0) {
            return Err(IgaError::Config("elements must be at least 1 in every direction".into()));
        }
        if self.degree.get().iter().any(|&p| p == 0) {
            return Err(IgaError::Config("degree must be at least 1 in every direction".into()));
        }
        if let Some(ng) = self.n_gauss {
            if ng.get().iter().any(|&n| n == 0) {
                return Err(IgaError::Config("n_gauss must be at least 1".into()));
            }
        }
        for (name, v) in [("eps_cross", self.eps_cross), ("eps_solve", self.eps_solve), ("eps_round", self.eps_round)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(IgaError::Config(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        if self.rank_cap == 0 {
            return Err(IgaError::Config("rank_cap must be positive".into()));
        }
        if let Some(xi) = self.probe {
            if xi.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(IgaError::Config("probe must lie in the unit parameter cube".into()));
            }
        }
        Ok(())
    }

    pub fn boundary_or_default(&self) -> BoundarySpec {
        self.boundary.clone().unwrap_or_else(|| default_boundary(self.geometry.name))
    }

    pub fn problem(&self) -> (SourceSpec, Option<AnalyticSpec>) {
        match (self.source, self.analytic) {
            (None, None) => default_problem(self.geometry.name),
            (Some(s), a) => (s, a),
            (None, Some(a)) => (default_problem(self.geometry.name).0, Some(a)),
        }
    }

    pub fn assembly_options(&self) -> AssemblyOptions {
        AssemblyOptions { eps_cross: self.eps_cross, eps_round: self.eps_round, rank_cap: self.rank_cap, seed: self.seed }
    }

    pub fn amen_options(&self) -> AmenOptions {
        AmenOptions {
            eps: self.eps_solve,
            max_sweeps: self.solver.max_sweeps,
            kick: self.solver.kick,
            max_direct: self.solver.max_direct,
            max_rank: self.solver.max_rank.unwrap_or(usize::MAX),
            seed: self.seed,
            ..AmenOptions::default()
        }
    }

    /// Canonical description of everything the assembled `K` and `f` depend on.
    pub fn cache_key_material(&self) -> String {
        let mut params: BTreeMap<String, f64> =
            self.geometry.name.defaults().iter().map(|(k, v)| (k.to_string(), *v)).collect();
        params.extend(self.geometry.params.iter().map(|(k, v)| (k.clone(), *v)));
        let degree = self.degree.get();
        let key = serde_json::json!({
            "format": 1,
            "geometry": self.geometry.name,
            "params": params,
            "degree": degree,
            "elements": self.elements.get(),
            "n_gauss": self.n_gauss.map(|n| n.get()).unwrap_or(degree.map(|p| p + 1)),
            "eps_cross": self.eps_cross,
            "eps_round": self.eps_round,
            "rank_cap": self.rank_cap,
            "seed": self.seed,
            "source": self.problem().0,
        });
        key.to_string()
    }
}

/// Geometry, discretization and problem data for one configuration.
pub struct Problem {
    pub config: SolveConfig,
    pub patch: GeometryPatch,
    pub disc: Discretization,
    pub bc: BoundarySpec,
    pub source: SourceSpec,
    pub analytic: Option<AnalyticSpec>,
}

impl Problem {
    pub fn new(config: &SolveConfig) -> Result<Self> {
        config.validate()?;
        let patch = make_geometry(config.geometry.name, &config.geometry.params)?;
        let disc = Discretization::for_patch(&patch, config.degree.get(), config.elements.get(), config.n_gauss.map(|n| n.get()))?;
        let (source, analytic) = config.problem();
        Ok(Problem { config: config.clone(), patch, disc, bc: config.boundary_or_default(), source, analytic })
    }

    pub fn exact(&self) -> Result<Option<Box<ScalarFn<'static>>>> {
        self.analytic.map(|a| a.function(&self.patch, &self.bc)).transpose()
    }
}

/// Storage for assembled operators, keyed by [`SolveConfig::cache_key_material`].
pub trait OperatorCache: Sync {
    fn load(&self, key: &str) -> Option<(TtMatrix, TtTensor)>;
    fn store(&self, key: &str, k: &TtMatrix, f: &TtTensor);
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Timings {
    pub setup_s: f64,
    pub stiffness_s: f64,
    pub load_s: f64,
    pub reduce_s: f64,
    pub solve_s: f64,
    pub postprocess_s: f64,
    pub total_s: f64,
}

impl Timings {
    /// Stiffness, load and boundary reduction together.
    pub fn assemble_s(&self) -> f64 {
        self.stiffness_s + self.load_s + self.reduce_s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeValue {
    pub xi: [f64; 3],
    pub x: [f64; 3],
    pub u: f64,
    pub exact: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionReport {
    pub label: Option<String>,
    pub geometry: GeometryKind,
    pub degree: [usize; 3],
    pub elements: [usize; 3],
    pub modes: [usize; 3],
    pub dofs: usize,
    pub interior_dofs: usize,
    pub eps_cross: f64,
    pub eps_solve: f64,
    pub eps_round: f64,
    pub rank_cap: usize,
    pub seed: u64,
    pub source: SourceSpec,
    pub analytic: Option<AnalyticSpec>,
    pub l2_error: Option<f64>,
    pub probe: Option<ProbeValue>,
    pub ranks_k: Vec<usize>,
    pub ranks_f: Vec<usize>,
    pub ranks_u: Vec<usize>,
    pub cr_k: f64,
    pub cr_f: f64,
    pub cr_u: f64,
    pub residual: f64,
    pub residual_recomputed: f64,
    pub converged: bool,
    pub sweeps: usize,
    pub cache_hit: bool,
    pub cross: Vec<CrossSummary>,
    pub degenerate_boundary: bool,
    pub warnings: Vec<String>,
    pub timings: Timings,
}

/// Report plus the TT objects behind it.
pub struct Solution {
    pub report: SolutionReport,
    pub problem: Problem,
    /// Stiffness before boundary reduction.
    pub k: TtMatrix,
    /// Load before boundary reduction.
    pub f: TtTensor,
    pub system: AssembledSystem,
    /// Full coefficient field, lift included.
    pub u: TtTensor,
}

pub fn solve_poisson(config: &SolveConfig) -> Result<Solution> {
    solve_poisson_cached(config, None)
}

pub fn solve_poisson_cached(config: &SolveConfig, cache: Option<&dyn OperatorCache>) -> Result<Solution> {
    let total = Instant::now();
    let mut timings = Timings::default();
    let t = Instant::now();
    let problem = Problem::new(config)?;
    let exact = problem.exact()?;
    let (patch, disc) = (&problem.patch, &problem.disc);
    timings.setup_s = t.elapsed().as_secs_f64();

    let mut warnings = Vec::new();
    if patch.degenerate_boundary {
        warnings.push("geometry has a collapsed face; the metric is singular there but not at quadrature points".into());
    }
    let opts = config.assembly_options();
    let key = config.cache_key_material();
    let mut cross = Vec::new();
    let cached = cache.and_then(|c| c.load(&key)).filter(|(k, f)| {
        let m = disc.modes().to_vec();
        k.row_modes() == m.as_slice() && f.modes() == m
    });
    let cache_hit = cached.is_some();
    let (k, f) = match cached {
        Some(kf) => kf,
        None => {
            let t = Instant::now();
            let st = assemble_stiffness(patch, disc, &opts)?;
            timings.stiffness_s = t.elapsed().as_secs_f64();
            let t = Instant::now();
            let src = problem.source.function();
            let (f, fs) = assemble_load(patch, disc, &*src, &opts)?;
            timings.load_s = t.elapsed().as_secs_f64();
            cross = st.metric;
            cross.push(fs);
            if let Some(c) = cache {
                c.store(&key, &st.k, &f);
            }
            (st.k, f)
        }
    };
    for c in &cross {
        if let Some(w) = &c.warning {
            warnings.push(format!("{}: {w}", c.field));
        }
    }

    let t = Instant::now();
    let system = apply_dirichlet(&k, &f, &problem.bc, patch, disc, exact.as_deref(), config.eps_round)?;
    timings.reduce_s = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let sol = amen_solve(&system.k_int, &system.f_int, None, &config.amen_options())?;
    timings.solve_s = t.elapsed().as_secs_f64();
    if !sol.converged {
        warnings.push(format!("solver stopped at relative residual {:.3e} above {:.1e}", sol.residual, config.eps_solve));
    }

    let t = Instant::now();
    let residual_recomputed = relative_residual(&system.k_int, &sol.x, &system.f_int)?;
    let u = system.expand(&sol.x)?;
    let l2 = match &exact {
        Some(e) => Some(l2_error(&u, &**e, patch, disc)?),
        None => None,
    };
    let probe = match config.probe {
        Some(xi) => {
            let x = patch.eval_point(xi)?;
            Some(ProbeValue { xi, x, u: eval_field(&u, disc, xi)?, exact: exact.as_ref().map(|e| e(x)) })
        }
        None => None,
    };
    timings.postprocess_s = t.elapsed().as_secs_f64();
    timings.total_s = total.elapsed().as_secs_f64();

    let modes = disc.modes();
    let report = SolutionReport {
        label: config.label.clone(),
        geometry: config.geometry.name,
        degree: config.degree.get(),
        elements: config.elements.get(),
        modes,
        dofs: disc.dofs(),
        interior_dofs: system.interior_modes().iter().product(),
        eps_cross: config.eps_cross,
        eps_solve: config.eps_solve,
        eps_round: config.eps_round,
        rank_cap: config.rank_cap,
        seed: config.seed,
        source: problem.source,
        analytic: problem.analytic,
        l2_error: l2,
        probe,
        ranks_k: k.ranks(),
        ranks_f: f.ranks(),
        ranks_u: u.ranks(),
        cr_k: compression_ratio_matrix(&k),
        cr_f: compression_ratio_tensor(&f),
        cr_u: compression_ratio_tensor(&u),
        residual: sol.residual,
        residual_recomputed,
        converged: sol.converged,
        sweeps: sol.sweeps,
        cache_hit,
        cross,
        degenerate_boundary: patch.degenerate_boundary,
        warnings,
        timings,
    };
    Ok(Solution { report, problem, k, f, system, u })
}

/// Basis-value matrix (points × coefficients) of direction `d`.
fn point_matrix(disc: &Discretization, d: usize, points: &[f64]) -> Result<DMatrix<f64>> {
    let basis = &disc.bases[d];
    let mut m = DMatrix::zeros(points.len(), basis.len());
    for (r, &x) in points.iter().enumerate() {
        let e = basis.eval(x)?;
        for (k, v) in e.values.iter().enumerate() {
            m[(r, e.first_index() + k)] = *v;
        }
    }
    Ok(m)
}

/// Value of the spline field with coefficients `u` at one parametric point.
pub fn eval_field(u: &TtTensor, disc: &Discretization, xi: [f64; 3]) -> Result<f64> {
    let maps = [point_matrix(disc, 0, &[xi[0]])?, point_matrix(disc, 1, &[xi[1]])?, point_matrix(disc, 2, &[xi[2]])?];
    Ok(u.map_modes(&[Some(&maps[0]), Some(&maps[1]), Some(&maps[2])])?.get(&[0, 0, 0]))
}

/// Field values on a tensor grid of parametric points, first direction slowest.
pub fn eval_field_grid(u: &TtTensor, disc: &Discretization, points: [&[f64]; 3]) -> Result<Vec<f64>> {
    let maps = [point_matrix(disc, 0, points[0])?, point_matrix(disc, 1, points[1])?, point_matrix(disc, 2, points[2])?];
    Ok(u.map_modes(&[Some(&maps[0]), Some(&maps[1]), Some(&maps[2])])?.full())
}

/// Relative error `∫|u − û| dΩ / ∫|û| dΩ` on the assembly quadrature grid.
pub fn l2_error(u: &TtTensor, exact: &ScalarFn<'_>, patch: &GeometryPatch, disc: &Discretization) -> Result<f64> {
    let vt = [disc.values[0].transpose(), disc.values[1].transpose(), disc.values[2].transpose()];
    let uq = u.map_modes(&[Some(&vt[0]), Some(&vt[1]), Some(&vt[2])])?;
    let nq = disc.quad_sizes();
    let geo: Vec<Vec<_>> = (0..3)
        .map(|d| disc.quad[d].points.iter().map(|&x| patch.eval_direction(d, x)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let (c0, c1, c2) = (uq.core(0), uq.core(1), uq.core(2));
    let (r1, r2) = (c1.left(), c1.right());
    // per-slab partial sums collected in order so the total is reproducible
    let parts: Vec<(f64, f64)> = (0..nq[0])
        .into_par_iter()
        .map(|q1| -> Result<(f64, f64)> {
            let mut num = 0.0;
            let mut den = 0.0;
            let a: Vec<f64> = (0..r1).map(|k| c0.get(0, q1, k)).collect();
            let mut b = vec![0.0; r2];
            for q2 in 0..nq[1] {
                for (j, bj) in b.iter_mut().enumerate() {
                    *bj = (0..r1).map(|k| a[k] * c1.get(k, q2, j)).sum();
                }
                for q3 in 0..nq[2] {
                    let uh: f64 = (0..r2).map(|j| b[j] * c2.get(j, q3, 0)).sum();
                    let xi = [disc.quad[0].points[q1], disc.quad[1].points[q2], disc.quad[2].points[q3]];
                    let (x, jac) = patch.point_and_jacobian_from([&geo[0][q1], &geo[1][q2], &geo[2][q3]]);
                    let det = patch.metric_from_jacobian(jac, xi)?.det;
                    let w = disc.quad[0].weights[q1] * disc.quad[1].weights[q2] * disc.quad[2].weights[q3] * det.abs();
                    let ue = exact(x);
                    num += (uh - ue).abs() * w;
                    den += ue.abs() * w;
                }
            }
            Ok((num, den))
        })
        .collect::<Result<_>>()?;
    let (num, den) = parts.iter().fold((0.0, 0.0), |(a, b), (c, d)| (a + c, b + d));
    if den == 0.0 {
        return Err(IgaError::UndefinedNorm);
    }
    Ok(num / den)
}

/// Uniform `m³` parametric samples `(ξ, x, u)` with the first direction fastest.
pub fn sample_field(u: &TtTensor, patch: &GeometryPatch, disc: &Discretization, m: usize) -> Result<Vec<([f64; 3], [f64; 3], f64)>> {
    let pts: Vec<f64> = if m == 1 { vec![0.5] } else { (0..m).map(|i| i as f64 / (m - 1) as f64).collect() };
    let vals = eval_field_grid(u, disc, [&pts, &pts, &pts])?;
    let mut out = Vec::with_capacity(m * m * m);
    for k in 0..m {
        for j in 0..m {
            for i in 0..m {
                let xi = [pts[i], pts[j], pts[k]];
                out.push((xi, patch.eval_point(xi)?, vals[(i * m + j) * m + k]));
            }
        }
    }
    Ok(out)
}

/// Full-grid solution of the same discrete problem.
pub struct ReferenceSolution {
    pub k: CsrMatrix,
    pub f: Vec<f64>,
    pub k_int: CsrMatrix,
    pub f_int: Vec<f64>,
    pub u: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub assemble_s: f64,
    pub solve_s: f64,
}

/// Element-loop assembly and CG solve, sharing the lift with the TT pipeline.
pub fn full_grid_reference(problem: &Problem, lift: &TtTensor, tol: f64) -> Result<ReferenceSolution> {
    let t = Instant::now();
    let src = problem.source.function();
    let (k, f) = assemble_full(&problem.patch, &problem.disc, &*src)?;
    let sys = reduce(k, f, lift.full(), &problem.bc, &problem.disc)?;
    let assemble_s = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let (x, residual, iterations) = pcg(&sys.k_int, &sys.f_int, tol, 20 * sys.f_int.len() + 1000);
    let u = sys.expand(&x);
    let solve_s = t.elapsed().as_secs_f64();
    Ok(ReferenceSolution {
        k: sys.k_full,
        f: sys.f_full,
        k_int: sys.k_int,
        f_int: sys.f_int,
        u,
        residual,
        iterations,
        assemble_s,
        solve_s,
    })
}

/// Relative differences between the TT pipeline and the reference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Comparison {
    pub k_rel: f64,
    pub f_rel: f64,
    pub k_int_rel: f64,
    pub f_int_rel: f64,
    pub u_rel: f64,
    pub reference_residual: f64,
    pub reference_l2_error: Option<f64>,
    pub reference_assemble_s: f64,
    pub reference_solve_s: f64,
}

/// Largest coefficient count for which operators are compared densely.
const DENSE_COMPARE: usize = 4096;

fn rel_vec(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

/// Relative Frobenius distance of a TT operator from a sparse one.
pub fn operator_distance(tt: &TtMatrix, sparse: &CsrMatrix) -> f64 {
    let rows: usize = tt.row_modes().iter().product();
    if rows <= DENSE_COMPARE {
        let d = tt.full() - sparse.to_dense();
        return d.norm() / sparse.frobenius();
    }
    // entries on the sparse pattern, plus the TT mass outside it
    let rm = tt.row_modes().to_vec();
    let cm = tt.col_modes().to_vec();
    let unflat = |mut k: usize, m: &[usize]| {
        let i3 = k % m[2];
        k /= m[2];
        [k / m[1], k % m[1], i3]
    };
    let sums: Vec<(f64, f64)> = (0..sparse.nrows)
        .into_par_iter()
        .map(|r| {
            let ri = unflat(r, &rm);
            let mut diff = 0.0;
            let mut on = 0.0;
            for k in sparse.indptr[r]..sparse.indptr[r + 1] {
                let ci = unflat(sparse.indices[k] as usize, &cm);
                let v = tt.get(&ri, &ci);
                diff += (v - sparse.values[k]).powi(2);
                on += v * v;
            }
            (diff, on)
        })
        .collect();
    let (diff, on) = sums.iter().fold((0.0, 0.0), |(a, b), (c, d)| (a + c, b + d));
    let off = (tt.norm().powi(2) - on).max(0.0);
    (diff + off).sqrt() / sparse.frobenius()
}

/// Runs the reference on the same problem and compares.
pub fn compare_with_reference(sol: &Solution, tol: f64) -> Result<Comparison> {
    let r = full_grid_reference(&sol.problem, &sol.system.lift, tol)?;
    let reference_l2_error = match sol.problem.exact()? {
        Some(e) => {
            let modes = sol.problem.disc.modes();
            let u_ref = TtTensor::from_full(&r.u, &modes, 1e-14)?;
            Some(l2_error(&u_ref, &*e, &sol.problem.patch, &sol.problem.disc)?)
        }
        None => None,
    };
    Ok(Comparison {
        k_rel: operator_distance(&sol.k, &r.k),
        f_rel: rel_vec(&sol.f.full(), &r.f),
        k_int_rel: operator_distance(&sol.system.k_int, &r.k_int),
        f_int_rel: rel_vec(&sol.system.f_int.full(), &r.f_int),
        u_rel: rel_vec(&sol.u.full(), &r.u),
        reference_residual: r.residual,
        reference_l2_error,
        reference_assemble_s: r.assemble_s,
        reference_solve_s: r.solve_s,
    })
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_validation() {
        let cfg: SolveConfig = serde_json::from_str(r#"{"geometry": {"name": "ring"}}"#).unwrap();
        assert_eq!(cfg.degree.get(), [2, 2, 2]);
        assert_eq!(cfg.eps_solve, 1e-8);
        assert_eq!(cfg.problem(), (SourceSpec::Zero, Some(AnalyticSpec::Ring)));
        assert!(serde_json::from_str::<SolveConfig>(r#"{"geometry": {"name": "ring"}, "typo": 1}"#).is_err());
        let cfg: SolveConfig =
            serde_json::from_str(r#"{"geometry": {"name": "unit_cube"}, "elements": [2, 3, 4], "source": {"constant": 2.0}}"#).unwrap();
        assert_eq!(cfg.elements.get(), [2, 3, 4]);
        assert_eq!(cfg.problem(), (SourceSpec::Constant(2.0), None));
        let mut bad = cfg.clone();
        bad.eps_solve = 0.0;
        assert!(matches!(bad.validate(), Err(IgaError::Config(_))));
        bad.eps_solve = 1e-8;
        bad.elements = PerDirection::Uniform(0);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn slope_of_power_law() {
        let x = [4.0, 8.0, 16.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-2.5)).collect();
        assert!((loglog_slope(&x, &y) + 2.5).abs() < 1e-12);
    }

    #[test]
    fn cube_solution_improves_with_degree() {
        let e1 = solve_poisson(&SolveConfig::preset(GeometryKind::UnitCube, 1, 4)).unwrap().report.l2_error.unwrap();
        let e2 = solve_poisson(&SolveConfig::preset(GeometryKind::UnitCube, 2, 4)).unwrap().report.l2_error.unwrap();
        assert!(e2 < e1, "{e2} vs {e1}");
    }
}
