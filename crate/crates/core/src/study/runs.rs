//! The four sweeps. Solver failures become flagged rows; only configuration
//! errors abort a sweep.

use std::collections::HashMap;
use std::time::Instant;

use crate::dg_assembly::{
    assemble_conforming, assemble_forms, sipg_quadratic, ConformingSpace, MaterialParams, PenaltyParams,
};
use crate::eigensolve::{rigid_mode_count, solve_pencil, EigenPair, SpectrumRequest, RIGID_TOL};
use crate::fe_basis::{DgSpace, ReferenceElement};
use crate::mesh::{generate, refine, Domain, Mesh};
use crate::source_solve::{error_norms, manufactured, solve_source};
use crate::Result;

use super::{
    reference_eigenvalues, ConvergenceRecord, Flag, LevelRange, Mode, ReferenceValue, StudyConfig,
    NEGATIVE_OMEGA_TOL,
};

/// Rigid-mode count and the lowest Steklov eigenvalues of one discretization.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub ndofs: usize,
    /// Pairs with `|ρ − 1| ≤ RIGID_TOL`.
    pub rigid: usize,
    /// The remaining `ω = ρ − 1`, ascending, at most `nev`.
    pub omegas: Vec<f64>,
}

/// Lowest pairs of the SIPG pencil, ascending. `ρ` is the quadrature
/// Rayleigh quotient `a_h(x,x)/b_h(x,x)` of each computed vector, which is
/// not polluted by the rounding of the assembled `λ` terms.
pub fn dg_eigenpairs(
    mesh: &Mesh,
    degree: usize,
    mat: &MaterialParams,
    pen: &PenaltyParams,
    nev: usize,
    seed: u64,
) -> Result<Vec<EigenPair>> {
    let space = DgSpace::new(mesh, degree)?;
    let forms = assemble_forms(&space, mat, pen);
    let pairs = solve_pencil(&forms.a, &forms.b, &request(nev, mesh.dim(), seed))?;
    Ok(requotient(pairs, |x| sipg_quadratic(&space, x, mat, pen)))
}

/// Conforming counterpart of [`dg_eigenpairs`]; vectors are in conforming
/// coefficients.
pub fn cg_eigenpairs(mesh: &Mesh, degree: usize, mat: &MaterialParams, nev: usize, seed: u64) -> Result<Vec<EigenPair>> {
    let forms = assemble_conforming(mesh, degree, mat)?;
    let pairs = solve_pencil(&forms.a, &forms.b, &request(nev, mesh.dim(), seed))?;
    let dg = DgSpace::new(mesh, degree)?;
    // jumps of a continuous field vanish, so the SIPG form is the conforming one
    let pen = PenaltyParams::default();
    Ok(requotient(pairs, |x| sipg_quadratic(&dg, &forms.space.to_dg(x, &dg), mat, &pen)))
}

pub fn dg_spectrum(
    mesh: &Mesh,
    degree: usize,
    mat: &MaterialParams,
    pen: &PenaltyParams,
    nev: usize,
    seed: u64,
) -> Result<Spectrum> {
    let ndofs = dg_ndofs(mesh, degree);
    Ok(spectrum_of(dg_eigenpairs(mesh, degree, mat, pen, nev, seed)?, ndofs, nev))
}

pub fn cg_spectrum(mesh: &Mesh, degree: usize, mat: &MaterialParams, nev: usize, seed: u64) -> Result<Spectrum> {
    let ndofs = ConformingSpace::new(mesh, degree)?.n_dofs();
    Ok(spectrum_of(cg_eigenpairs(mesh, degree, mat, nev, seed)?, ndofs, nev))
}

fn request(nev: usize, dim: usize, seed: u64) -> SpectrumRequest {
    SpectrumRequest {
        seed,
        ..SpectrumRequest::for_dim(nev, dim)
    }
}

fn requotient(mut pairs: Vec<EigenPair>, quadratic: impl Fn(&[f64]) -> (f64, f64)) -> Vec<EigenPair> {
    for p in &mut pairs {
        let (a, b) = quadratic(&p.vector);
        p.rho = a / b;
        p.omega = p.rho - 1.0;
    }
    pairs.sort_by(|p, q| p.rho.total_cmp(&q.rho));
    pairs
}

fn spectrum_of(pairs: Vec<EigenPair>, ndofs: usize, nev: usize) -> Spectrum {
    let rigid = pairs.iter().filter(|p| (p.rho - 1.0).abs() <= RIGID_TOL).count();
    let omegas = pairs
        .iter()
        .filter(|p| (p.rho - 1.0).abs() > RIGID_TOL)
        .map(|p| p.omega)
        .take(nev)
        .collect();
    Spectrum { ndofs, rigid, omegas }
}

/// Validates `config` and runs the sweep of its mode.
pub fn run(config: &StudyConfig) -> Result<Vec<ConvergenceRecord>> {
    match config.mode {
        Mode::EigenConvergence => run_eigen_convergence(config),
        Mode::Robustness => run_robustness(config),
        Mode::SourceConvergence => run_source_convergence(config),
        Mode::ConformingCompare => run_conforming_compare(config),
    }
}

/// Meshes of `levels`, built by successive refinement.
fn mesh_ladder(domain: Domain, levels: LevelRange) -> Vec<Mesh> {
    let mut meshes = vec![generate(domain, levels.min)];
    for _ in levels.min..levels.max {
        let next = refine(meshes.last().expect("nonempty"));
        meshes.push(next);
    }
    meshes
}

fn dg_ndofs(mesh: &Mesh, degree: usize) -> usize {
    let n_basis = ReferenceElement::new(mesh.dim(), degree).map(|e| e.n_basis()).unwrap_or(0);
    mesh.n_cells() * mesh.dim() * n_basis
}

/// Row coordinates shared by every quantity of one solve.
#[derive(Debug, Clone, Copy)]
struct RowKey {
    domain: Domain,
    degree: usize,
    level: usize,
    ndofs: usize,
    lambda: f64,
    gamma: f64,
    h: f64,
}

impl RowKey {
    fn record(&self, quantity: String, value: f64, reference: f64, flags: Vec<Flag>, wall: f64) -> ConvergenceRecord {
        ConvergenceRecord {
            domain: self.domain,
            degree: self.degree,
            level: self.level,
            ndofs: self.ndofs,
            lambda: self.lambda,
            gamma: self.gamma,
            quantity,
            value,
            reference,
            error: (value - reference).abs(),
            flags,
            wall_time_s: wall,
            h: self.h,
            message: None,
        }
    }

    fn failed(&self, quantity: String, reference: f64, message: String, wall: f64) -> ConvergenceRecord {
        let mut r = self.record(quantity, f64::NAN, reference, vec![Flag::Failed], wall);
        r.message = Some(message);
        r
    }
}

/// Rows `<prefix>omega_1..count` and `<prefix>rigid_modes` for one solve.
fn eigen_rows(
    key: &RowKey,
    prefix: &str,
    spectrum: &Result<Spectrum>,
    refs: &std::result::Result<Vec<ReferenceValue>, String>,
    count: usize,
    wall: f64,
) -> Vec<ConvergenceRecord> {
    let expected = rigid_mode_count(key.domain.dim());
    let mut rows = Vec::with_capacity(count + 1);
    match spectrum {
        Ok(s) => {
            for j in 0..count {
                let quantity = format!("{prefix}omega_{}", j + 1);
                let reference = refs.as_ref().ok().and_then(|r| r.get(j).copied());
                let Some(&value) = s.omegas.get(j) else {
                    let message = format!("only {} Steklov eigenvalues computed", s.omegas.len());
                    rows.push(key.failed(quantity, reference.map_or(f64::NAN, |r| r.value), message, wall));
                    continue;
                };
                let mut flags = Vec::new();
                if value < NEGATIVE_OMEGA_TOL {
                    flags.push(Flag::NegativeOmega);
                }
                let mut row = match reference {
                    Some(r) => {
                        if r.fallback {
                            flags.push(Flag::ReferenceFallback);
                        }
                        if r.crossing {
                            flags.push(Flag::Crossing);
                        }
                        if (value - r.value).abs() < 3.0 * r.uncertainty {
                            flags.push(Flag::ReferenceLimited);
                        }
                        key.record(quantity, value, r.value, flags, wall)
                    }
                    None => {
                        flags.push(Flag::Failed);
                        let mut row = key.record(quantity, value, f64::NAN, flags, wall);
                        row.message = Some(match refs {
                            Err(m) => format!("reference: {m}"),
                            Ok(_) => "no reference for this index".into(),
                        });
                        row
                    }
                };
                if row.has(Flag::NegativeOmega) && row.message.is_none() {
                    row.message = Some(format!("omega = {value:e} below {NEGATIVE_OMEGA_TOL:e}"));
                }
                rows.push(row);
            }
            let flags = if s.rigid == expected { vec![] } else { vec![Flag::Failed] };
            let mut row = key.record(
                format!("{prefix}rigid_modes"),
                s.rigid as f64,
                expected as f64,
                flags,
                wall,
            );
            if s.rigid != expected {
                row.message = Some(format!("{} rigid modes, expected {expected}", s.rigid));
            }
            rows.push(row);
        }
        Err(e) => {
            for j in 0..count {
                let reference = refs.as_ref().ok().and_then(|r| r.get(j)).map_or(f64::NAN, |r| r.value);
                rows.push(key.failed(format!("{prefix}omega_{}", j + 1), reference, e.to_string(), wall));
            }
            rows.push(key.failed(format!("{prefix}rigid_modes"), expected as f64, e.to_string(), wall));
        }
    }
    rows
}

type RefCache = HashMap<(u64, u64), std::result::Result<Vec<ReferenceValue>, String>>;

fn cached_reference<'c>(
    cache: &'c mut RefCache,
    config: &StudyConfig,
    mat: &MaterialParams,
    pen: &PenaltyParams,
    lambda: f64,
    gamma: f64,
) -> &'c std::result::Result<Vec<ReferenceValue>, String> {
    cache.entry((lambda.to_bits(), gamma.to_bits())).or_insert_with(|| {
        reference_eigenvalues(
            config.domain,
            mat,
            pen,
            config.nev,
            config.reference_levels(),
            config.seed,
        )
        .map_err(|e| e.to_string())
    })
}

/// The reference at `gamma`, or, when that `P3` form is not coercive, the one
/// at the next larger configured penalty (then the default), marked as a
/// fallback. The continuous eigenvalues do not depend on `γ`.
fn reference_for(
    cache: &mut RefCache,
    config: &StudyConfig,
    mat: &MaterialParams,
    lambda: f64,
    gamma: f64,
) -> Result<std::result::Result<Vec<ReferenceValue>, String>> {
    let own = cached_reference(cache, config, mat, &PenaltyParams::uniform(gamma)?, lambda, gamma).clone();
    let Err(message) = own else {
        return Ok(own);
    };
    let mut larger: Vec<f64> = config.gammas.iter().copied().filter(|&g| g > gamma).collect();
    larger.sort_by(f64::total_cmp);
    let default = PenaltyParams::default().gamma_mu;
    if default > gamma && !larger.contains(&default) {
        larger.push(default);
    }
    for g in larger {
        if let Ok(refs) = cached_reference(cache, config, mat, &PenaltyParams::uniform(g)?, lambda, g) {
            return Ok(Ok(refs.iter().map(|r| ReferenceValue { fallback: true, ..*r }).collect()));
        }
    }
    Ok(Err(message))
}

fn elapsed(config: &StudyConfig, t: Instant) -> f64 {
    if config.timings {
        t.elapsed().as_secs_f64()
    } else {
        0.0
    }
}

fn eigen_sweep(config: &StudyConfig, count: usize) -> Result<Vec<ConvergenceRecord>> {
    config.validate()?;
    let meshes = mesh_ladder(config.domain, config.levels);
    let mut cache = RefCache::new();
    let mut rows = Vec::new();
    for &k in &config.degrees {
        for &lambda in &config.lambdas {
            let mat = MaterialParams::new(config.mu, lambda)?;
            for &gamma in &config.gammas {
                let pen = PenaltyParams::uniform(gamma)?;
                let refs = reference_for(&mut cache, config, &mat, lambda, gamma)?;
                for mesh in &meshes {
                    let t = Instant::now();
                    let key = RowKey {
                        domain: config.domain,
                        degree: k,
                        level: mesh.level(),
                        ndofs: dg_ndofs(mesh, k),
                        lambda,
                        gamma,
                        h: mesh.h(),
                    };
                    let spectrum = dg_spectrum(mesh, k, &mat, &pen, config.nev, config.seed);
                    rows.extend(eigen_rows(&key, "", &spectrum, &refs, count, elapsed(config, t)));
                }
            }
        }
    }
    Ok(rows)
}

/// `ω_1..ω_nev` for every `(k, λ, γ, level)` against `P3` references.
pub fn run_eigen_convergence(config: &StudyConfig) -> Result<Vec<ConvergenceRecord>> {
    eigen_sweep(config, config.nev)
}

/// `ω_1` over the λ sweep with a reference per `(λ, γ)`.
pub fn run_robustness(config: &StudyConfig) -> Result<Vec<ConvergenceRecord>> {
    eigen_sweep(config, 1)
}

/// `e_dG`, `e_h`, `e_bnd` of each manufactured case over the grid.
/// `value` and `error` both hold the error norm; `reference` is `0`.
pub fn run_source_convergence(config: &StudyConfig) -> Result<Vec<ConvergenceRecord>> {
    config.validate()?;
    let meshes = mesh_ladder(config.domain, config.levels);
    let dim = config.domain.dim();
    let mut rows = Vec::new();
    for case in config.cases() {
        for &k in &config.degrees {
            for &lambda in &config.lambdas {
                let mat = MaterialParams::new(config.mu, lambda)?;
                let exact = manufactured(case, dim, mat)?;
                for &gamma in &config.gammas {
                    let pen = PenaltyParams::uniform(gamma)?;
                    for mesh in &meshes {
                        let t = Instant::now();
                        let key = RowKey {
                            domain: config.domain,
                            degree: k,
                            level: mesh.level(),
                            ndofs: dg_ndofs(mesh, k),
                            lambda,
                            gamma,
                            h: mesh.h(),
                        };
                        let names = ["e_dG", "e_h", "e_bnd"].map(|n| format!("{case}:{n}"));
                        let solved = DgSpace::new(mesh, k).and_then(|space| {
                            let w_h = solve_source(&space, &mat, &pen, |x, n| exact.boundary_datum(x, n))?;
                            Ok(error_norms(&space, &w_h, &exact, &mat, &pen))
                        });
                        let wall = elapsed(config, t);
                        match solved {
                            Ok(e) => {
                                for (name, v) in names.into_iter().zip([e.dg, e.energy, e.boundary]) {
                                    rows.push(key.record(name, v, 0.0, vec![], wall));
                                }
                            }
                            Err(err) => {
                                for name in names {
                                    rows.push(key.failed(name, 0.0, err.to_string(), wall));
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(rows)
}

/// Conforming `P_k` (`cg_` rows, `γ = 0`) next to SIPG `P_k` (`dg_` rows)
/// on the same meshes. Conforming rows use the reference at the largest `γ`.
pub fn run_conforming_compare(config: &StudyConfig) -> Result<Vec<ConvergenceRecord>> {
    config.validate()?;
    let meshes = mesh_ladder(config.domain, config.levels);
    let mut cache = RefCache::new();
    let mut rows = Vec::new();
    for &k in &config.degrees {
        for &lambda in &config.lambdas {
            let mat = MaterialParams::new(config.mu, lambda)?;
            // small γ may leave the P3 reference non-coercive; the limit itself
            // does not depend on γ
            let gamma_max = config.gammas.iter().copied().fold(f64::MIN, f64::max);
            let cg_refs =
                cached_reference(&mut cache, config, &mat, &PenaltyParams::uniform(gamma_max)?, lambda, gamma_max).clone();
            for mesh in &meshes {
                let t = Instant::now();
                let spectrum = cg_spectrum(mesh, k, &mat, config.nev, config.seed);
                let ndofs = ConformingSpace::new(mesh, k).map_or(0, |s| s.n_dofs());
                let key = RowKey {
                    domain: config.domain,
                    degree: k,
                    level: mesh.level(),
                    ndofs,
                    lambda,
                    gamma: 0.0,
                    h: mesh.h(),
                };
                rows.extend(eigen_rows(&key, "cg_", &spectrum, &cg_refs, config.nev, elapsed(config, t)));
            }
            for &gamma in &config.gammas {
                let pen = PenaltyParams::uniform(gamma)?;
                let refs = cached_reference(&mut cache, config, &mat, &pen, lambda, gamma).clone();
                for mesh in &meshes {
                    let t = Instant::now();
                    let key = RowKey {
                        domain: config.domain,
                        degree: k,
                        level: mesh.level(),
                        ndofs: dg_ndofs(mesh, k),
                        lambda,
                        gamma,
                        h: mesh.h(),
                    };
                    let spectrum = dg_spectrum(mesh, k, &mat, &pen, config.nev, config.seed);
                    rows.extend(eigen_rows(&key, "dg_", &spectrum, &refs, config.nev, elapsed(config, t)));
                }
            }
        }
    }
    Ok(rows)
}
