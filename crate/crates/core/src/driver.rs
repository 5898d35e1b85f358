//! The adaptive loop: reduced sweeps over parent-slabs, estimator-driven
//! full-order enrichment of both bases, and an optional validation pass.

use std::io::Write;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::dwr::{classify, effectivity, relative_estimate, Prediction};
use crate::error::{Error, Result};
use crate::fom::FullOrderModel;
use crate::pod::{ipod_update, ReducedBasis};
use crate::rom::ReducedOperators;
use crate::slab::SlabVectors;

/// Whether a full-order reference run accompanies the adaptive run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    Adaptive,
    Verification,
}

/// Parameters of the adaptive loop.
#[derive(Debug, Clone, PartialEq)]
pub struct DriverConfig {
    /// Tolerance on the relative slab estimate.
    pub tol: f64,
    pub eps_primal: f64,
    pub eps_dual: f64,
    /// Number of parent-slabs `K`; must divide the number of slabs.
    pub parent_slabs: usize,
    /// Enrichments allowed per parent-slab; `None` means `2(r+1)L`.
    pub max_enrichments: Option<usize>,
    pub validation: bool,
    /// Run the full-order reference on a second thread.
    pub threads: usize,
}

impl DriverConfig {
    pub fn validate(&self, slabs: usize) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::config("tol", format!("tolerance must be positive, got {}", self.tol)));
        }
        for (name, eps) in [("eps_primal", self.eps_primal), ("eps_dual", self.eps_dual)] {
            if !(eps > 0.0 && eps <= 1.0) {
                return Err(Error::config(name, format!("energy threshold must lie in (0, 1], got {eps}")));
            }
        }
        if self.parent_slabs == 0 || slabs % self.parent_slabs != 0 {
            return Err(Error::config(
                "parent_slabs",
                format!("{} parent-slabs do not evenly split {slabs} slabs", self.parent_slabs),
            ));
        }
        if self.max_enrichments == Some(0) {
            return Err(Error::config("max_enrichments", "enrichment cap must be at least 1"));
        }
        Ok(())
    }
}

/// One slab of the final report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlabReport {
    pub index: usize,
    pub midpoint: f64,
    pub goal_rom: f64,
    pub goal_fom: Option<f64>,
    pub eta: f64,
    pub eta_rel: f64,
    pub true_error_rel: Option<f64>,
    pub prediction: Option<Prediction>,
    /// Basis sizes after the slab's parent-slab was processed.
    pub primal_size: usize,
    pub dual_size: usize,
}

/// Outcome of one parent-slab.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParentReport {
    pub index: usize,
    pub iterations: usize,
    pub enrichments: usize,
    pub eta_max: f64,
    pub capped: bool,
}

/// Everything a run produces.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub slabs: Vec<SlabReport>,
    pub parents: Vec<ParentReport>,
    pub goal_rom: f64,
    pub goal_fom: Option<f64>,
    pub relative_error: Option<f64>,
    pub eta_total: f64,
    pub effectivity: Option<f64>,
    pub fom_solves: usize,
    pub enrichments: usize,
    pub primal_size: usize,
    pub dual_size: usize,
    /// Counts of prediction cases 1 to 4 (verification only).
    pub confusion: Option<[usize; 4]>,
    pub tol: f64,
    pub wall_rom: f64,
    pub wall_fom: Option<f64>,
    pub speedup: Option<f64>,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub primal_basis: ReducedBasis,
    #[serde(skip)]
    pub dual_basis: ReducedBasis,
}

/// Writes one JSON object per line to an optional sink.
pub struct Progress<'a> {
    sink: Option<&'a mut dyn Write>,
}

impl<'a> Progress<'a> {
    pub fn new(sink: Option<&'a mut dyn Write>) -> Self {
        Progress { sink }
    }

    pub fn silent() -> Self {
        Progress { sink: None }
    }

    fn emit(&mut self, value: serde_json::Value) {
        if let Some(w) = self.sink.as_deref_mut() {
            // Progress output is best effort; a closed pipe must not abort a run.
            let _ = writeln!(w, "{value}");
        }
    }
}

/// Result of the adaptive phase.
#[derive(Debug, Clone)]
pub struct AdaptiveOutcome {
    pub primal: ReducedBasis,
    pub dual: ReducedBasis,
    /// Goal, estimate and relative estimate of every slab from the last sweep of its parent-slab.
    pub goal: Vec<f64>,
    pub eta: Vec<f64>,
    pub eta_rel: Vec<f64>,
    pub sizes: Vec<(usize, usize)>,
    pub parents: Vec<ParentReport>,
    pub fom_solves: usize,
    pub enrichments: usize,
    pub warnings: Vec<String>,
}

fn snapshot_matrix(u: &[DVector<f64>]) -> DMatrix<f64> {
    DMatrix::from_columns(u)
}

/// Full-order primal and dual solves on the first slab seed both bases.
pub fn bootstrap(fom: &FullOrderModel, cfg: &DriverConfig) -> Result<(ReducedBasis, ReducedBasis)> {
    let n = fom.dofs();
    let u = fom.solve_primal_slab(0, fom.initial())?;
    let primal = ipod_update(&ReducedBasis::empty(n, cfg.eps_primal), &snapshot_matrix(&u))?;
    let z = fom.solve_dual_slab(&DVector::zeros(n), Some(&u))?;
    let dual = ipod_update(&ReducedBasis::empty(n, cfg.eps_dual), &snapshot_matrix(&z))?;
    Ok((primal, dual))
}

struct Sweep {
    u: Vec<SlabVectors>,
    z: Vec<SlabVectors>,
    goal: Vec<f64>,
    eta: Vec<f64>,
}

/// Reduced primal sweep forward and dual sweep backward over `slabs`, with zero
/// dual data at the right end.
fn sweep(
    fom: &FullOrderModel,
    red: &ReducedOperators,
    slabs: std::ops::Range<usize>,
    incoming: &DVector<f64>,
) -> Result<Sweep> {
    let len = slabs.len();
    let mut u: Vec<SlabVectors> = Vec::with_capacity(len);
    let mut couplings_d = Vec::with_capacity(len);
    let mut coupling_p = red.primal_trace_coupling(incoming);
    let mut coupling_d = red.dual_trace_coupling(incoming);
    for m in slabs.clone() {
        let t0 = fom.grid().interval(m).0;
        let um = red.solve_primal(&coupling_p, &red.primal_load(fom.source(), t0))?;
        couplings_d.push(coupling_d);
        (coupling_p, coupling_d) = red.couplings_from_reduced(&um);
        u.push(um);
    }
    let mut z = vec![Vec::new(); len];
    let mut eta = vec![0.0; len];
    let mut next = DVector::zeros(red.dual_len());
    for (l, m) in slabs.clone().enumerate().rev() {
        let zl = red.solve_dual(&next, &red.dual_rhs(&u[l]))?;
        next = red.dual_start_value(&zl);
        let t0 = fom.grid().interval(m).0;
        eta[l] = red.estimate(&u[l], &couplings_d[l], &zl, &red.dual_load(fom.source(), t0));
        z[l] = zl;
    }
    let goal = u.iter().map(|ul| red.goal_value(ul)).collect();
    Ok(Sweep { u, z, goal, eta })
}

/// Runs the adaptive loop over all parent-slabs.
pub fn run_adaptive(fom: &FullOrderModel, cfg: &DriverConfig, progress: &mut Progress) -> Result<AdaptiveOutcome> {
    let slabs = fom.slabs();
    cfg.validate(slabs)?;
    let per_parent = slabs / cfg.parent_slabs;
    let cap = cfg.max_enrichments.unwrap_or(2 * fom.temporal().len() * per_parent);
    let n = fom.dofs();

    let (mut primal, mut dual) = bootstrap(fom, cfg)?;
    let mut fom_solves = 2;
    progress.emit(json!({"event": "bootstrap", "primal": primal.len(), "dual": dual.len()}));

    let mut out = AdaptiveOutcome {
        primal: primal.clone(),
        dual: dual.clone(),
        goal: Vec::with_capacity(slabs),
        eta: Vec::with_capacity(slabs),
        eta_rel: Vec::with_capacity(slabs),
        sizes: Vec::with_capacity(slabs),
        parents: Vec::with_capacity(cfg.parent_slabs),
        fom_solves: 0,
        enrichments: 0,
        warnings: Vec::new(),
    };
    let mut red = ReducedOperators::new(fom, &primal, &dual)?;
    let mut incoming = fom.initial().clone();
    let (mut abs_sum, mut goal_sum) = (0.0, 0.0);

    for k in 0..cfg.parent_slabs {
        let range = k * per_parent..(k + 1) * per_parent;
        let mut enrichments = 0;
        let mut iterations = 0;
        let (s, rel, eta_max, capped) = loop {
            iterations += 1;
            let s = sweep(fom, &red, range.clone(), &incoming)?;
            let parent_abs: f64 = s.goal.iter().map(|j| j.abs()).sum();
            let mean_abs = (abs_sum + parent_abs) / (out.goal.len() + per_parent) as f64;
            let total = goal_sum + s.goal.iter().sum::<f64>();
            let rel: Vec<f64> =
                s.eta.iter().zip(&s.goal).map(|(&e, &j)| relative_estimate(e, j, mean_abs, total)).collect();
            // First maximal slab wins ties.
            let (l_max, eta_max) = rel
                .iter()
                .map(|r| r.abs())
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (l, r)| if r > best.1 { (l, r) } else { best });
            let done = eta_max <= cfg.tol;
            let capped = !done && enrichments >= cap;
            progress.emit(json!({
                "event": "parent_slab",
                "parent": k,
                "iteration": iterations,
                "eta_max": eta_max,
                "slab_max": range.start + l_max,
                "primal": primal.len(),
                "dual": dual.len(),
                "action": if done { "accept" } else if capped { "cap" } else { "enrich" },
            }));
            if done || capped {
                break (s, rel, eta_max, capped);
            }

            let m = range.start + l_max;
            let primal_in = if l_max == 0 {
                incoming.clone()
            } else {
                primal.matrix() * red.end_value(&s.u[l_max - 1])
            };
            let dual_in = if l_max + 1 == per_parent {
                DVector::zeros(n)
            } else {
                dual.matrix() * red.dual_start_value(&s.z[l_max + 1])
            };
            let u = fom.solve_primal_slab(m, &primal_in)?;
            primal = ipod_update(&primal, &snapshot_matrix(&u))?;
            let z = fom.solve_dual_slab(&dual_in, Some(&u))?;
            dual = ipod_update(&dual, &snapshot_matrix(&z))?;
            fom_solves += 2;
            enrichments += 1;
            red = ReducedOperators::new(fom, &primal, &dual)?;
        };
        if capped {
            out.warnings.push(format!(
                "parent-slab {k}: enrichment cap {cap} reached with eta_max = {eta_max:.3e}"
            ));
        }
        incoming = primal.matrix() * red.end_value(&s.u[per_parent - 1]);
        abs_sum += s.goal.iter().map(|j| j.abs()).sum::<f64>();
        goal_sum += s.goal.iter().sum::<f64>();
        out.goal.extend_from_slice(&s.goal);
        out.eta.extend_from_slice(&s.eta);
        out.eta_rel.extend_from_slice(&rel);
        out.sizes.extend(std::iter::repeat_n((primal.len(), dual.len()), per_parent));
        out.enrichments += enrichments;
        out.parents.push(ParentReport { index: k, iterations, enrichments, eta_max, capped });
    }
    out.primal = primal;
    out.dual = dual;
    out.fom_solves = fom_solves;
    Ok(out)
}

/// Reduced trajectories over the whole time interval with frozen bases.
#[derive(Debug, Clone, PartialEq)]
pub struct Validation {
    pub goal: Vec<f64>,
    pub eta: Vec<f64>,
    pub eta_rel: Vec<f64>,
    /// Reduced primal coefficients of every slab.
    pub primal: Vec<SlabVectors>,
}

/// Primal forward and dual backward over all slabs with the final bases.
pub fn validation_loop(fom: &FullOrderModel, primal: &ReducedBasis, dual: &ReducedBasis) -> Result<Validation> {
    let red = ReducedOperators::new(fom, primal, dual)?;
    let s = sweep(fom, &red, 0..fom.slabs(), fom.initial())?;
    let mean_abs = s.goal.iter().map(|j| j.abs()).sum::<f64>() / s.goal.len().max(1) as f64;
    let total: f64 = s.goal.iter().sum();
    let eta_rel = s.eta.iter().zip(&s.goal).map(|(&e, &j)| relative_estimate(e, j, mean_abs, total)).collect();
    Ok(Validation { goal: s.goal, eta: s.eta, eta_rel, primal: s.u })
}

/// Per-slab relative true error with the same zero-denominator fallback as the estimator.
fn relative_errors(fine: &[f64], coarse: &[f64]) -> Vec<f64> {
    let mean_abs = fine.iter().map(|j| j.abs()).sum::<f64>() / fine.len().max(1) as f64;
    let total: f64 = fine.iter().sum();
    fine.iter()
        .zip(coarse)
        .map(|(&f, &c)| {
            let err = f - c;
            if f.abs() < 1e-14 * (1.0 + total.abs()) {
                if mean_abs > 0.0 {
                    err / mean_abs
                } else if err == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                err / f
            }
        })
        .collect()
}

/// Timed full-order reference: per-slab goal values.
pub fn fom_reference(fom: &FullOrderModel) -> Result<(Vec<f64>, f64)> {
    let start = Instant::now();
    let values = fom.goal_trajectory::<std::io::Sink>(None)?;
    Ok((values, start.elapsed().as_secs_f64()))
}

/// Bootstrap, adaptive loop, optional validation, and in verification mode the
/// full-order reference with true errors, effectivity and speedup.
pub fn run_full(fom: &FullOrderModel, cfg: &DriverConfig, mode: RunMode, progress: &mut Progress) -> Result<RunReport> {
    cfg.validate(fom.slabs())?;
    let concurrent = mode == RunMode::Verification && cfg.threads > 1;
    let (rom, reference) = if concurrent {
        std::thread::scope(|scope| {
            let handle = scope.spawn(|| fom_reference(fom));
            let rom = run_rom(fom, cfg, progress);
            let reference = handle.join().map_err(|_| Error::Numerical("reference run panicked".into()));
            (rom, Some(reference))
        })
    } else {
        (run_rom(fom, cfg, progress), None)
    };
    let (adaptive, validation, wall_rom) = rom?;
    let reference = match (mode, reference) {
        (RunMode::Adaptive, _) => None,
        (RunMode::Verification, Some(r)) => Some(r??),
        (RunMode::Verification, None) => Some(fom_reference(fom)?),
    };
    if let Some((_, wall)) = &reference {
        progress.emit(json!({"event": "fom_reference", "wall": wall}));
    }

    let (goal, eta, eta_rel) = match &validation {
        Some(v) => (v.goal.clone(), v.eta.clone(), v.eta_rel.clone()),
        None => (adaptive.goal.clone(), adaptive.eta.clone(), adaptive.eta_rel.clone()),
    };
    let fine = reference.as_ref().map(|(v, _)| v.clone());
    let true_rel = fine.as_ref().map(|f| relative_errors(f, &goal));
    let mut slabs = Vec::with_capacity(goal.len());
    let mut confusion = [0usize; 4];
    for m in 0..goal.len() {
        let prediction = true_rel.as_ref().map(|t| classify(t[m], eta_rel[m], cfg.tol));
        if let Some(p) = prediction {
            confusion[p.case() as usize - 1] += 1;
        }
        slabs.push(SlabReport {
            index: m,
            midpoint: fom.grid().midpoint(m),
            goal_rom: goal[m],
            goal_fom: fine.as_ref().map(|f| f[m]),
            eta: eta[m],
            eta_rel: eta_rel[m],
            true_error_rel: true_rel.as_ref().map(|t| t[m]),
            prediction,
            primal_size: adaptive.sizes[m].0,
            dual_size: adaptive.sizes[m].1,
        });
    }
    let goal_rom: f64 = goal.iter().sum();
    let eta_total: f64 = eta.iter().sum();
    let goal_fom = fine.as_ref().map(|f| f.iter().sum::<f64>());
    let wall_fom = reference.as_ref().map(|r| r.1);
    let report = RunReport {
        slabs,
        parents: adaptive.parents,
        goal_rom,
        goal_fom,
        relative_error: goal_fom.map(|f| ((f - goal_rom) / f).abs()),
        eta_total,
        effectivity: goal_fom.and_then(|f| effectivity(f, goal_rom, eta_total)),
        fom_solves: adaptive.fom_solves,
        enrichments: adaptive.enrichments,
        primal_size: adaptive.primal.len(),
        dual_size: adaptive.dual.len(),
        confusion: reference.as_ref().map(|_| confusion),
        tol: cfg.tol,
        wall_rom,
        wall_fom,
        speedup: wall_fom.map(|w| w / wall_rom),
        warnings: adaptive.warnings,
        primal_basis: adaptive.primal,
        dual_basis: adaptive.dual,
    };
    progress.emit(json!({
        "event": "done",
        "goal_rom": report.goal_rom,
        "goal_fom": report.goal_fom,
        "fom_solves": report.fom_solves,
        "primal": report.primal_size,
        "dual": report.dual_size,
    }));
    Ok(report)
}

type RomRun = (AdaptiveOutcome, Option<Validation>, f64);

fn run_rom(fom: &FullOrderModel, cfg: &DriverConfig, progress: &mut Progress) -> Result<RomRun> {
    let start = Instant::now();
    let adaptive = run_adaptive(fom, cfg, progress)?;
    let validation = if cfg.validation {
        let v = validation_loop(fom, &adaptive.primal, &adaptive.dual)?;
        progress.emit(json!({"event": "validation", "goal_rom": v.goal.iter().sum::<f64>()}));
        Some(v)
    } else {
        None
    };
    Ok((adaptive, validation, start.elapsed().as_secs_f64()))
}
