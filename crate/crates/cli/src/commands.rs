//! One function per subcommand. Each returns the result JSON, the digests
//! of the inputs it read, and the exit code encoding its verdict; hard
//! failures short-circuit with a message and code instead.

use crate::manifest::sha256_hex;
use crate::{exit, exit_for, Command, GlobalArgs};
use holorealize_core::holonomy::{
    contraction_report, default_contraction_samples, holonomy_jet, holonomy_jet_reversed,
};
use holorealize_core::normalform::{check_negative_resonances, diffeo_normal_form, gauge_linearize_system};
use holorealize_core::realize::{realize, RealizationCertificate, RealizeOptions};
use holorealize_core::spectral::{
    analyze_matrix_with, enumerate_resonances, exp_2pi_i_scalar, negative_resonance_degree_bound,
    resonance_value,
};
use holorealize_core::{CMatrix, DiffeoJet, Error, Jet, SaddleSystem, SaddleTerm, C64};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::path::Path;

pub struct CmdOutput {
    pub result: Value,
    pub inputs: BTreeMap<String, String>,
    pub exit: i32,
}

pub struct CmdFailure {
    pub message: String,
    pub exit: i32,
}

pub type CmdResult = Result<CmdOutput, CmdFailure>;

fn fail(code: i32, message: impl Into<String>) -> CmdFailure {
    CmdFailure { message: message.into(), exit: code }
}

fn from_core(err: Error) -> CmdFailure {
    let code = exit_for(&err);
    CmdFailure { message: err.to_string(), exit: code }
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn read_input<T: DeserializeOwned>(
    path: &Path,
    inputs: &mut BTreeMap<String, String>,
) -> Result<T, CmdFailure> {
    let bytes = std::fs::read(path)
        .map_err(|e| fail(exit::IO, format!("cannot read {}: {e}", path.display())))?;
    inputs.insert(path.display().to_string(), sha256_hex(&bytes));
    serde_json::from_slice(&bytes)
        .map_err(|e| fail(exit::IO, format!("cannot parse {}: {e}", path.display())))
}

fn to_value<T: Serialize>(v: &T) -> Result<Value, CmdFailure> {
    serde_json::to_value(v).map_err(|e| fail(exit::IO, format!("cannot encode result: {e}")))
}

pub fn dispatch(g: &GlobalArgs, cmd: &Command) -> CmdResult {
    match cmd {
        Command::Analyze(a) => cmd_analyze(g, a),
        Command::Normalform(a) => cmd_normalform(g, a),
        Command::Realize(a) => cmd_realize(g, a),
        Command::Holonomy(a) => cmd_holonomy(g, a),
        Command::Verify(a) => cmd_verify(g, a),
        Command::Contraction(a) => cmd_contraction(g, a),
        Command::Counterexample(a) => cmd_counterexample(g, a),
        Command::DemoLinearizable(a) => cmd_demo_linearizable(g, a),
    }
}

fn cmd_analyze(g: &GlobalArgs, args: &crate::AnalyzeArgs) -> CmdResult {
    let tol = g.tolerances();
    let mut inputs = BTreeMap::new();
    let a: CMatrix = read_input(&args.matrix, &mut inputs)?;
    if args.max_degree < 2 {
        return Err(fail(exit::IO, "resonance tables start at degree 2"));
    }
    let sd = analyze_matrix_with(&a, 0.01, &tol).map_err(from_core)?;
    let table = enumerate_resonances(&sd, args.max_degree, tol.int);
    let result = json!({
        "spectral": to_value(&sd)?,
        "resonances": to_value(&table)?,
        "negative_degree_bound": negative_resonance_degree_bound(&sd),
    });
    Ok(CmdOutput { result, inputs, exit: exit::OK })
}

fn cmd_normalform(g: &GlobalArgs, args: &crate::NormalformArgs) -> CmdResult {
    let tol = g.tolerances();
    let mut inputs = BTreeMap::new();
    let h: DiffeoJet = read_input(&args.jet, &mut inputs)?;
    let a: CMatrix = read_input(&args.matrix, &mut inputs)?;
    let order = args.order.unwrap_or_else(|| h.order());
    let sd = analyze_matrix_with(&a, 0.01, &tol).map_err(from_core)?;
    let nf = diffeo_normal_form(&h, &sd, order, &tol).map_err(from_core)?;
    let verdict = check_negative_resonances(&nf, &tol);
    let result = json!({
        "normal_form": to_value(&nf)?,
        "verdict": to_value(&verdict)?,
    });
    Ok(CmdOutput { result, inputs, exit: exit::OK })
}

fn cmd_realize(g: &GlobalArgs, args: &crate::RealizeArgs) -> CmdResult {
    let tol = g.tolerances();
    let mut inputs = BTreeMap::new();
    let h: DiffeoJet = read_input(&args.jet, &mut inputs)?;
    let a: CMatrix = read_input(&args.matrix, &mut inputs)?;
    let opts = RealizeOptions { nu_override: args.nu, eps_request: 0.01, tol };
    match realize(&h, &a, &opts) {
        Ok(cert) => Ok(CmdOutput {
            result: json!({ "verdict": "Realizable", "certificate": to_value(&cert)? }),
            inputs,
            exit: exit::OK,
        }),
        Err(Error::Obstructed(rs)) => Ok(CmdOutput {
            result: json!({ "verdict": "Obstructed", "resonances": to_value(&rs)? }),
            inputs,
            exit: exit::CONTRARY,
        }),
        Err(e) => Err(from_core(e)),
    }
}

fn cmd_holonomy(g: &GlobalArgs, args: &crate::HolonomyArgs) -> CmdResult {
    let mut inputs = BTreeMap::new();
    let sys: SaddleSystem = read_input(&args.system, &mut inputs)?;
    let tol = args.tol.unwrap_or(g.tol_ode);
    let run = if args.reversed { holonomy_jet_reversed } else { holonomy_jet };
    let h = run(&sys, args.nu, args.x0.0, tol).map_err(from_core)?;
    Ok(CmdOutput { result: to_value(&h)?, inputs, exit: exit::OK })
}

fn cmd_verify(g: &GlobalArgs, args: &crate::VerifyArgs) -> CmdResult {
    let mut inputs = BTreeMap::new();
    let mut certs: Vec<(String, RealizationCertificate)> = Vec::with_capacity(args.cert.len());
    for path in &args.cert {
        let cert: RealizationCertificate = read_input(path, &mut inputs)?;
        certs.push((path.display().to_string(), cert));
    }

    // Each certificate is an independent pure computation.
    let tol = g.tol_ode;
    let jobs = g.jobs.max(1).min(certs.len().max(1));
    let mut outcomes: Vec<Option<Result<f64, Error>>> = (0..certs.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let mut handles = Vec::with_capacity(jobs);
        for worker in 0..jobs {
            let certs = &certs;
            handles.push(scope.spawn(move || {
                let mut local = Vec::new();
                let mut i = worker;
                while i < certs.len() {
                    let cert = &certs[i].1;
                    let res = holonomy_jet(&cert.system, cert.nu, c(1.0, 0.0), tol)
                        .map(|h| h.jet.max_diff(&cert.input_jet));
                    local.push((i, res));
                    i += jobs;
                }
                local
            }));
        }
        for h in handles {
            for (i, res) in h.join().expect("verification worker panicked") {
                outcomes[i] = Some(res);
            }
        }
    });

    let mut entries = Vec::with_capacity(certs.len());
    let mut worst = 0.0f64;
    let mut all_pass = true;
    let mut numerical = false;
    for ((path, _), outcome) in certs.iter().zip(outcomes) {
        match outcome.expect("missing verification slot") {
            Ok(err) => {
                let pass = err <= args.max_error;
                all_pass &= pass;
                worst = worst.max(err);
                entries.push(json!({ "cert": path, "max_coeff_error": err, "pass": pass }));
            }
            Err(e) => {
                numerical = true;
                entries.push(json!({ "cert": path, "error": e.to_string() }));
            }
        }
    }
    let code = if numerical {
        exit::NUMERICAL
    } else if all_pass {
        exit::OK
    } else {
        exit::CONTRARY
    };
    let result = json!({
        "cases": entries,
        "max_coeff_error": worst,
        "threshold": args.max_error,
        "pass": all_pass && !numerical,
    });
    Ok(CmdOutput { result, inputs, exit: code })
}

fn cmd_contraction(g: &GlobalArgs, args: &crate::ContractionArgs) -> CmdResult {
    let mut inputs = BTreeMap::new();
    let sys: SaddleSystem = read_input(&args.system, &mut inputs)?;
    let sd = read_input(&args.spectral, &mut inputs)?;
    let xs = default_contraction_samples();
    let report =
        contraction_report(&sys, &sd, &xs, args.pairs, g.seed, g.tol_ode).map_err(from_core)?;
    let code = if report.pass { exit::OK } else { exit::CONTRARY };
    Ok(CmdOutput { result: to_value(&report)?, inputs, exit: code })
}

/// The canned obstruction data: spectrum (−3/2, −1/4) carrying the jet
/// (−y₁ + y₂², −i·y₂), whose lone degree-2 negative resonance blocks
/// realization until the matrix is shifted by a negative integer multiple
/// of the identity.
fn counterexample_data(shift: usize) -> (CMatrix, DiffeoJet) {
    let base = CMatrix::diag(&[c(-1.5, 0.0), c(-0.25, 0.0)]);
    let a = if shift > 0 {
        base.sub(&CMatrix::identity(2).scale(c(shift as f64, 0.0)))
    } else {
        base
    };
    let mut comp0 = Jet::monomial(2, 2, &[1, 0], c(-1.0, 0.0));
    comp0.add_term(&[0, 2], c(1.0, 0.0));
    let comp1 = Jet::monomial(2, 2, &[0, 1], c(0.0, -1.0));
    let h = DiffeoJet::new(vec![comp0, comp1]).expect("canned jet is well formed");
    (a, h)
}

fn cmd_counterexample(g: &GlobalArgs, args: &crate::CounterexampleArgs) -> CmdResult {
    let tol = g.tolerances();
    let inputs = BTreeMap::new();
    let (a, h) = counterexample_data(args.shift);
    let sd = analyze_matrix_with(&a, 0.01, &tol).map_err(from_core)?;

    // Divisor tables: R − k for the three quadratic positions against
    // each target component, over x-degrees k = 0..=20.
    let positions: [[usize; 2]; 3] = [[2, 0], [1, 1], [0, 2]];
    let mut tables = Vec::new();
    let mut min_abs = f64::INFINITY;
    for comp in 0..2usize {
        let mut rows = Vec::new();
        for k in 0..=20usize {
            let mut row = vec![json!(k)];
            for pos in &positions {
                let d = resonance_value(&sd.mu, pos, comp).re - k as f64;
                min_abs = min_abs.min(d.abs());
                row.push(json!(d));
            }
            rows.push(Value::Array(row));
        }
        tables.push(json!({ "component": comp + 1, "rows": rows }));
    }
    let divisors_nonzero = min_abs > tol.int;

    // A gauge run on the unshifted linear part, to exhibit the divisors
    // actually dividing something.
    let (base, _) = counterexample_data(0);
    let sample = SaddleSystem::new(
        base.clone(),
        vec![SaddleTerm { xdeg: 1, comp: 0, exp: vec![0, 2], coeff: c(1.0, 0.0) }],
    )
    .map_err(from_core)?;
    let sd0 = analyze_matrix_with(&base, 0.01, &tol).map_err(from_core)?;
    let gauge = gauge_linearize_system(&sample, &sd0, &[2], None, &tol).map_err(from_core)?;
    let gauge_json = json!({
        "solved": to_value(&gauge.solved)?,
        "residual": gauge.residual,
    });

    let opts = RealizeOptions { nu_override: args.nu, eps_request: 0.01, tol };
    let common = json!({
        "shift": args.shift,
        "divisor_tables": tables,
        "min_abs_divisor": min_abs,
        "divisors_nonzero": divisors_nonzero,
        "gauge_sample": gauge_json,
    });
    let mut result = common;

    match realize(&h, &a, &opts) {
        Err(Error::Obstructed(rs)) => {
            let reproduced = rs.len() == 1
                && rs[0].j == vec![0, 2]
                && rs[0].k == 0
                && (rs[0].value + c(1.0, 0.0)).norm() <= 1e-9;
            result["verdict"] = json!("Obstructed");
            result["resonances"] = to_value(&rs)?;
            result["obstruction_reproduced"] = json!(reproduced);
            let code = if args.shift == 0 && reproduced { exit::OK } else { exit::CONTRARY };
            Ok(CmdOutput { result, inputs, exit: code })
        }
        Ok(cert) => {
            // A successful realization is the expected verdict only after
            // a shift; its holonomy must keep the original multipliers.
            let hol =
                holonomy_jet(&cert.system, 1, c(1.0, 0.0), g.tol_ode).map_err(from_core)?;
            let lin_err =
                hol.jet.linear_matrix().sub(&h.linear_matrix()).max_abs();
            result["verdict"] = json!("Realizable");
            result["nu"] = json!(cert.nu);
            result["linear_residual"] = json!(cert.linear_residual);
            result["holonomy_linear_error"] = json!(lin_err);
            result["certificate"] = to_value(&cert)?;
            let code = if args.shift > 0 && lin_err <= 1e-9 { exit::OK } else { exit::CONTRARY };
            Ok(CmdOutput { result, inputs, exit: code })
        }
        Err(e) => Err(from_core(e)),
    }
}

fn cmd_demo_linearizable(g: &GlobalArgs, args: &crate::DemoLinearizableArgs) -> CmdResult {
    let tol = g.tolerances();
    let inputs = BTreeMap::new();
    if args.mu1 >= 0.0 {
        return Err(fail(exit::IO, "mu1 must be negative"));
    }
    if args.mu2 >= 0 {
        return Err(fail(exit::IO, "mu2 must be a negative integer"));
    }
    if args.a_degree < 2 || args.a_degree > args.nu {
        return Err(fail(exit::IO, "a-degree must lie in 2..=nu"));
    }
    if args.nu < 2 {
        return Err(fail(exit::IO, "nu must be at least 2"));
    }

    let mu = [c(args.mu1, 0.0), c(args.mu2 as f64, 0.0)];
    let a = CMatrix::diag(&mu);
    let lambda = [exp_2pi_i_scalar(mu[0]), exp_2pi_i_scalar(mu[1])];
    let comp0 = Jet::monomial(2, args.nu, &[1, 0], lambda[0]);
    let mut comp1 = Jet::monomial(2, args.nu, &[0, 1], lambda[1]);
    if args.a_coeff.0.norm() > 0.0 {
        comp1.add_term(&[args.a_degree, 0], args.a_coeff.0);
    }
    let h = DiffeoJet::new(vec![comp0, comp1]).map_err(from_core)?;

    let opts = RealizeOptions { nu_override: Some(args.nu), eps_request: 0.01, tol };
    match realize(&h, &a, &opts) {
        Ok(cert) => {
            let hol = holonomy_jet(&cert.system, args.nu, c(1.0, 0.0), g.tol_ode)
                .map_err(from_core)?;
            let round_trip = hol.jet.max_diff(&cert.input_jet);
            let pass = round_trip <= 1e-6;
            let result = json!({
                "verdict": "Realizable",
                "nu": cert.nu,
                "round_trip_error": round_trip,
                "round_trip_pass": pass,
                "normalized_system_is_linear": cert.system_normalized.is_linear(),
                "certificate": to_value(&cert)?,
            });
            let code = if pass { exit::OK } else { exit::CONTRARY };
            Ok(CmdOutput { result, inputs, exit: code })
        }
        Err(Error::Obstructed(rs)) => Ok(CmdOutput {
            result: json!({ "verdict": "Obstructed", "resonances": to_value(&rs)? }),
            inputs,
            exit: exit::CONTRARY,
        }),
        Err(e) => Err(from_core(e)),
    }
}
