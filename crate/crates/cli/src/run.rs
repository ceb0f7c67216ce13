//! Executes one scenario and assembles its report.

use std::sync::Arc;

use cnp_core::beurling::{is_minimal, representation_diagnostics, synthesize};
use cnp_core::coeffmodel::{
    generate_invariant_subspace, inclusion_sigma_min, root_sweep, sweep_with_stability, WeightFamily,
};
use cnp_core::kernels::{evaluate, hadamard_quotient, is_cnp, is_psd, KernelMatrix, SampleSet};
use cnp_core::leech::{arias_pipeline, contractive_containment_check, solve};
use cnp_core::multcheck::{row_contraction_check, sup_rank};
use cnp_core::samplespace::{SampleSpace, Subspace};
use serde_json::{json, Value};

use crate::error::CliError;
use crate::report::{Check, Report};
use crate::scenario::{Scenario, SubspaceSpec, Task};

/// Floor for the contractivity defect of a Leech factor.
const CONTRACTIVITY_FLOOR: f64 = 1e-9;
/// Bound on co-isometry and Gram residuals.
const IDENTITY_RESIDUAL: f64 = 1e-8;
/// Bound on root function values above 1.
const ROOT_SLACK: f64 = 1e-8;

type Outcome = Result<(Value, Vec<Check>), CliError>;

/// Runs `task` (or the scenario's own task). Task failures are recorded in
/// the report rather than returned.
pub fn run(scenario: &Scenario, task: Option<Task>) -> Result<Report, CliError> {
    let task = match (task, scenario.task) {
        (Some(t), Some(own)) if t != own => {
            return Err(CliError::Invalid(format!(
                "scenario {} is a {} scenario, not {}",
                scenario.name,
                own.name(),
                t.name()
            )))
        }
        (Some(t), _) | (None, Some(t)) => t,
        (None, None) => {
            return Err(CliError::Invalid(format!("scenario {} names no task", scenario.name)))
        }
    };
    let seed = scenario.sample.as_ref().and_then(|s| s.seed());
    let mut report = Report::new(&scenario.name, task, scenario.tolerances, seed);
    let outcome = match task {
        Task::KernelCheck => kernel_check(scenario),
        Task::Synthesize => synthesize_task(scenario),
        Task::Leech => leech_task(scenario),
        Task::Pipeline => pipeline_task(scenario),
        Task::Rootfn => rootfn_task(scenario, &mut report),
        Task::Counterexample => counterexample_task(scenario),
    };
    match outcome {
        Ok((result, checks)) => {
            report.result = result;
            report.checks = checks;
        }
        Err(e) => report.error = Some(e.to_string()),
    }
    Ok(report.finish(&scenario.expect))
}

struct Setup {
    s: KernelMatrix,
    space: Arc<SampleSpace>,
}

fn setup(sc: &Scenario) -> Result<Setup, CliError> {
    let kernels = sc.kernels()?;
    let sample: Arc<SampleSet> = sc.sample_spec()?.build()?;
    let s_spec = kernels
        .s
        .as_ref()
        .ok_or_else(|| CliError::Invalid("task needs a CNP factor \"s\"".into()))?;
    let k = evaluate(&kernels.k, &sample)?;
    let s = evaluate(s_spec, &sample)?;
    let space = SampleSpace::new(k.tensor_identity(sc.fiber_dim)?, sc.tolerances.rank)?;
    Ok(Setup { s, space })
}

fn subspace(sc: &Scenario, which: &str, setup: &Setup) -> Result<Subspace, CliError> {
    let spec = match which {
        "m" => sc.subspaces.m.as_ref(),
        _ => sc.subspaces.n.as_ref(),
    };
    match spec {
        Some(spec) => spec.build(&setup.space, sc.tolerances.rank),
        None if which == "m" => SubspaceSpec::Whole.build(&setup.space, sc.tolerances.rank),
        None => Err(CliError::Invalid(format!("task needs subspace \"{which}\""))),
    }
}

fn kernel_check(sc: &Scenario) -> Outcome {
    let kernels = sc.kernels()?;
    let sample = sc.sample_spec()?.build()?;
    let tol = sc.tolerances.psd;
    let mut entries = Vec::new();
    let mut checks = Vec::new();
    let mut evaluated = Vec::new();
    for (role, spec) in [("k", Some(&kernels.k)), ("s", kernels.s.as_ref()), ("l", kernels.l.as_ref())] {
        let Some(spec) = spec else { continue };
        let k = evaluate(spec, &sample)?;
        let psd = is_psd(&k, tol);
        checks.push(Check::new(
            format!("{role} is PSD"),
            psd.verdict,
            format!("min eigenvalue {:.3e}", psd.min_eigenvalue),
        ));
        let cnp = match is_cnp(&k, None, tol) {
            Ok(r) => serde_json::to_value(r)?,
            Err(e) => json!({ "error": e.to_string() }),
        };
        let row = match row_contraction_check(&k, sample.dim(), tol) {
            Ok(r) => serde_json::to_value(r)?,
            Err(e) => json!({ "error": e.to_string() }),
        };
        entries.push(json!({
            "role": role,
            "variant": spec.name(),
            "n": k.n(),
            "psd": psd,
            "cnp": cnp,
            "row_contraction": row,
        }));
        evaluated.push((role, k));
    }
    let mut result = json!({ "kernels": entries });
    if let [(_, k), (_, s), ..] = evaluated.as_slice() {
        let q = hadamard_quotient(k, s)?;
        result["k_over_s_psd"] = serde_json::to_value(is_psd(&q, tol))?;
    }
    Ok((result, checks))
}

fn synthesize_task(sc: &Scenario) -> Outcome {
    let setup = setup(sc)?;
    let m = subspace(sc, "m", &setup)?;
    let r = synthesize(&m.kernel(), &setup.s, &sc.tolerances)?;
    let diag = representation_diagnostics(&r.phi, &setup.s, &m, sc.tolerances.rank)?;
    let tol = sc.check_tol;
    let checks = vec![
        Check::new("partial isometry", r.partial_isometry_ok, "singular values in {0, 1}"),
        Check::at_most("co-isometry residual", r.coisometry_residual, IDENTITY_RESIDUAL),
        Check::at_most("range equals M", diag.range_distance, tol),
        Check::at_most("M_Phi M_Phi* = P_M", diag.projection_residual, tol),
        Check::at_most("defect against K^M", diag.defect_residual, tol.min(IDENTITY_RESIDUAL)),
    ];
    let mut result = serde_json::to_value(&r)?;
    result["subspace_dim"] = json!(m.dim());
    result["space_dim"] = json!(setup.space.dim());
    result["representation"] = serde_json::to_value(diag)?;
    result["minimal"] = json!(is_minimal(&r.phi, sc.tolerances.rank));
    result["sup_rank"] = json!(sup_rank(&r.phi, sc.tolerances.rank));
    Ok((result, checks))
}

fn leech_task(sc: &Scenario) -> Outcome {
    let setup = setup(sc)?;
    let m = subspace(sc, "m", &setup)?;
    let n = subspace(sc, "n", &setup)?;
    let contained = contractive_containment_check(&m.kernel(), &n.kernel(), sc.tolerances.psd)?;
    let phi = synthesize(&m.kernel(), &setup.s, &sc.tolerances)?.phi;
    let psi = synthesize(&n.kernel(), &setup.s, &sc.tolerances)?.phi;
    let r = solve(&setup.s, &phi, &psi, &sc.tolerances)?;
    let checks = vec![
        Check::new("N contractively contained in M", contained, "K^M - K^N is PSD"),
        Check::at_most("factor residual", r.factor_residual, sc.check_tol),
        Check::at_least("contractivity", r.contractivity_min_eig, -CONTRACTIVITY_FLOOR),
        Check::at_most("Gram identity", r.gram_residual, IDENTITY_RESIDUAL),
    ];
    let result = json!({
        "contained": contained,
        "phi_shape": phi.shape(),
        "psi_shape": psi.shape(),
        "leech": r,
    });
    Ok((result, checks))
}

fn pipeline_task(sc: &Scenario) -> Outcome {
    let kernels = sc.kernels()?;
    if let Some(l) = &kernels.l {
        if *l != kernels.k {
            return Err(CliError::Invalid(
                "three-kernel pipelines (a different kernel for N) are not supported: the \
                 factorization can fail there; run the counterexample task for the obstruction"
                    .into(),
            ));
        }
    }
    let setup = setup(sc)?;
    let m = subspace(sc, "m", &setup)?;
    let n = subspace(sc, "n", &setup)?;
    let r = arias_pipeline(&m, &n, &setup.s, &sc.tolerances)?;
    let tol = sc.check_tol;
    let checks = vec![
        Check::at_most("M_PhiGamma M_PhiGamma* = P_N", r.projection_residual, tol),
        Check::at_most("composite is a partial isometry", r.composite_sigma_deviation, tol),
        Check::at_least("P_N >= M_Phi P_L M_Phi*", r.chain_upper_min_eig, -tol),
        Check::at_least("M_Phi P_L M_Phi* >= M_Psi M_Psi*", r.chain_lower_min_eig, -tol),
    ];
    let mut result = serde_json::to_value(&r)?;
    result["gamma_rank"] = json!(r.gamma.shape().1);
    Ok((result, checks))
}

fn weights_label(w: &WeightFamily) -> String {
    match w {
        WeightFamily::Hardy => "hardy".into(),
        WeightFamily::Bergman => "bergman".into(),
        WeightFamily::Dirichlet => "dirichlet".into(),
        WeightFamily::PowerAlpha { alpha } => format!("power_alpha({alpha})"),
    }
}

fn rootfn_task(sc: &Scenario, report: &mut Report) -> Outcome {
    let spec = sc
        .rootfn
        .as_ref()
        .ok_or_else(|| CliError::Invalid("task needs a \"rootfn\" section".into()))?;
    let generators: Vec<_> = spec.generators.iter().map(|g| g.polynomial()).collect();
    let label = spec.generators.iter().map(|g| g.label()).collect::<Vec<_>>().join(", ");
    let mut checks = Vec::new();
    let (sweep, stability) = if spec.check_stability {
        let s = sweep_with_stability(spec.weights, spec.degree, &generators, &spec.radii, &spec.thetas)?;
        checks.push(Check::new(
            "truncation stable",
            !s.flagged,
            format!("max change {:.3e} from D = {} to {}", s.max_change, s.degree, s.doubled_degree),
        ));
        let summary = json!({
            "doubled_degree": s.doubled_degree,
            "max_change": s.max_change,
            "flagged": s.flagged,
        });
        (s.report, summary)
    } else {
        let space = spec.weights.space(spec.degree)?;
        let m = generate_invariant_subspace(&space, &generators)?;
        (root_sweep(&space, &m, &spec.radii, &spec.thetas), Value::Null)
    };
    checks.insert(0, Check::new("0 <= G <= 1", sweep.in_range(ROOT_SLACK), "all grid values"));
    let result = json!({
        "weights": weights_label(&spec.weights),
        "degree": sweep.degree,
        "generator_spec": label,
        "samples": sweep.samples,
        "stability": stability,
    });
    report.sweep = Some((sweep, label));
    Ok((result, checks))
}

fn counterexample_task(sc: &Scenario) -> Outcome {
    let spec = sc.counterexample.clone().unwrap_or_default();
    let top = spec.degrees.iter().copied().max().unwrap_or(0);
    let num = spec.numerator.weights(top);
    let den = spec.denominator.weights(top);
    let closed_form = spec.numerator == WeightFamily::Hardy && spec.denominator == WeightFamily::Bergman;
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for &d in &spec.degrees {
        let sigma = inclusion_sigma_min(d, &num, &den)?;
        let mut row = json!({ "degree": d, "sigma_min": sigma });
        if closed_form {
            let expected = 1.0 / ((d + 1) as f64).sqrt();
            row["closed_form"] = json!(expected);
            checks.push(Check::new(
                format!("sigma_min(D = {d}) = 1/sqrt(D+1)"),
                sigma == expected,
                format!("{sigma} vs {expected}"),
            ));
        }
        rows.push(row);
    }
    let result = json!({
        "numerator": weights_label(&spec.numerator),
        "denominator": weights_label(&spec.denominator),
        "table": rows,
    });
    Ok((result, checks))
}
