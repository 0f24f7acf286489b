//! The release gate: eight numbered end-to-end checks, one verdict line
//! each. Every tolerance is pinned here as a named constant; run with
//! `--nocapture` to watch the lines print.

use holorealize_cli::commands::dispatch;
use holorealize_cli::{exit, Command, CounterexampleArgs, GlobalArgs};
use holorealize_core::corpus::{generate_corpus, CorpusCase};
use holorealize_core::formalcalc::{NilpotentVF, UnipotentJet};
use holorealize_core::holonomy::{
    cocycle_decay_fit, contraction_report, default_contraction_samples, holonomy_jet,
    holonomy_jet_reversed,
};
use holorealize_core::jets::Basis;
use holorealize_core::normalform::diffeo_normal_form;
use holorealize_core::realize::{realize, RealizeOptions};
use holorealize_core::spectral::{analyze_matrix_with, resonance};
use holorealize_core::{
    CMatrix, DiffeoJet, Jet, ResonanceClass, SaddleSystem, Tolerances, VFieldJet, C64,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::time::Instant;

/// Coefficient agreement between the integrated holonomy jet and the jet
/// that was realized.
const ROUND_TRIP_BUDGET: f64 = 1e-6;
/// ODE tolerance for the round-trip integrations.
const ROUND_TRIP_ODE_TOL: f64 = 1e-10;
/// Wall-clock budget for the full corpus sweep, seconds.
const CORPUS_BUDGET_S: f64 = 300.0;
/// Wall-clock budget for the canned obstruction run, seconds.
const OBSTRUCTION_BUDGET_S: f64 = 1.0;
/// Exponential/logarithm round-trip budget and minimum sample count.
const EXP_LOG_BUDGET: f64 = 1e-9;
const EXP_LOG_MIN_JETS: usize = 100;
/// Largest coefficient allowed on a non-integer resonance position after
/// reduction, and the conjugacy identity budget.
const NONRESONANT_BUDGET: f64 = 1e-9;
const CONJUGACY_BUDGET: f64 = 1e-8;
/// Field invariants: invariance of the semisimple part under the
/// suspension map, and its commutator with the rest of the field.
const PULLBACK_BUDGET: f64 = 1e-9;
const BRACKET_BUDGET: f64 = 1e-8;
/// Padding around [delta0, delta1] for the fitted contraction exponent,
/// and slack subtracted from the predicted cocycle decay rate.
const EXPONENT_WINDOW_PAD: f64 = 0.1;
const DECAY_SLACK: f64 = 0.2;
/// Holonomy linear part against the prescribed multipliers.
const HOLONOMY_LINEAR_BUDGET: f64 = 1e-9;
/// Base ODE tolerance for the step-halving and reversal checks; both
/// must agree within ten times this value.
const RICHARDSON_TOL: f64 = 1e-8;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn globals() -> GlobalArgs {
    GlobalArgs {
        tol_coeff: 1e-9,
        tol_int: 1e-6,
        tol_ode: ROUND_TRIP_ODE_TOL,
        seed: 7,
        jobs: 1,
        out: None,
    }
}

/// Everything measured on one corpus case in a single pass.
struct CaseReport {
    round_trip: f64,
    nonresonant_max: f64,
    conjugacy: f64,
    pullback: f64,
    bracket: f64,
    contraction_pass: bool,
    exponent_in_window: bool,
    exponent: f64,
    richardson: f64,
    reversal: f64,
}

fn semisimple_field(mu: &[C64], order: usize) -> VFieldJet {
    let mut diag = Vec::with_capacity(mu.len() + 1);
    diag.push(c(1.0, 0.0));
    diag.extend_from_slice(mu);
    VFieldJet::from_linear(&CMatrix::diag(&diag), order)
}

fn run_case(case: &CorpusCase, tol: &Tolerances) -> Result<CaseReport, String> {
    let tag = |e: &dyn std::fmt::Display| format!("case {}: {e}", case.id);
    let one = c(1.0, 0.0);
    let sd = analyze_matrix_with(&case.a, 0.01, tol).map_err(|e| tag(&e))?;
    let opts = RealizeOptions { nu_override: Some(case.nu), eps_request: 0.01, tol: tol.clone() };
    let cert = realize(&case.h, &case.a, &opts).map_err(|e| tag(&e))?;

    let hol = holonomy_jet(&cert.system, case.nu, one, ROUND_TRIP_ODE_TOL).map_err(|e| tag(&e))?;
    let round_trip = hol.jet.max_diff(&cert.input_jet);

    // Reduction quality: non-integer positions cleared, conjugacy exact.
    let nf = diffeo_normal_form(&case.h, &sd, case.nu, tol).map_err(|e| tag(&e))?;
    let mut nonresonant_max = 0.0f64;
    for (k, comp) in nf.normal.components().iter().enumerate() {
        for (_, exp, coeff) in comp.iter_nonzero() {
            let deg: usize = exp.iter().map(|&e| e as usize).sum();
            if deg < 2 {
                continue;
            }
            let j: Vec<usize> = exp.iter().map(|&e| e as usize).collect();
            if matches!(resonance(&sd.mu, &j, k, tol.int).class, ResonanceClass::NonInteger) {
                nonresonant_max = nonresonant_max.max(coeff.norm());
            }
        }
    }
    let conjugacy =
        case.h.conjugate(&nf.conjugator).map_err(|e| tag(&e))?.max_diff(&nf.normal);

    // Field invariants of the realized suspension.
    let xs = semisimple_field(&cert.spectral.mu, cert.f_suspended.order());
    let pullback = xs.pullback(&cert.f_suspended).map_err(|e| tag(&e))?.max_diff(&xs);
    let xs = semisimple_field(&cert.spectral.mu, cert.z_full.order());
    let bracket = xs.bracket(&cert.z_full.sub(&xs)).max_abs();

    // Transport contraction against the spectral window.
    let samples = default_contraction_samples();
    let report = contraction_report(&cert.system, &cert.spectral, &samples, 10, 7, 1e-9)
        .map_err(|e| tag(&e))?;
    let exponent_in_window = report.exponent >= sd.delta0 - EXPONENT_WINDOW_PAD
        && report.exponent <= sd.delta1 + EXPONENT_WINDOW_PAD;

    // Step-halving agreement and loop reversal.
    let h_base =
        holonomy_jet(&cert.system, case.nu, one, RICHARDSON_TOL).map_err(|e| tag(&e))?;
    let h_fine =
        holonomy_jet(&cert.system, case.nu, one, RICHARDSON_TOL / 10.0).map_err(|e| tag(&e))?;
    let richardson = h_base.jet.max_diff(&h_fine.jet);
    let rev =
        holonomy_jet_reversed(&cert.system, case.nu, one, RICHARDSON_TOL).map_err(|e| tag(&e))?;
    let composed = h_base.jet.compose(&rev.jet).map_err(|e| tag(&e))?;
    let reversal = composed.max_diff(&DiffeoJet::identity(case.n, case.nu));

    Ok(CaseReport {
        round_trip,
        nonresonant_max,
        conjugacy,
        pullback,
        bracket,
        contraction_pass: report.pass,
        exponent_in_window,
        exponent: report.exponent,
        richardson,
        reversal,
    })
}

/// Random coefficient with magnitude in [0.05, 0.5] and random phase.
fn coeff(rng: &mut ChaCha12Rng) -> C64 {
    let r = rng.gen_range(0.05..0.5);
    let th = rng.gen_range(0.0..std::f64::consts::TAU);
    c(r * th.cos(), r * th.sin())
}

/// Jet with random terms of degree 2..=ord only.
fn higher_order_jet(rng: &mut ChaCha12Rng, n: usize, ord: usize) -> Jet {
    let basis = Basis::get(n, ord);
    let mut j = Jet::zero(n, ord);
    for rank in basis.degree_start(2)..basis.dim() {
        if rng.gen_bool(0.6) {
            j.set_by_rank(rank, coeff(rng));
        }
    }
    j
}

/// Nilpotent field: strictly triangular linear part plus higher terms.
fn random_nilpotent(rng: &mut ChaCha12Rng, n: usize, ord: usize) -> VFieldJet {
    let mut comps: Vec<Jet> = (0..n).map(|_| higher_order_jet(rng, n, ord)).collect();
    for i in 0..n {
        for l in i + 1..n {
            if rng.gen_bool(0.5) {
                let mut e = vec![0usize; n];
                e[l] = 1;
                comps[i].add_term(&e, coeff(rng));
            }
        }
    }
    VFieldJet::new(comps).unwrap()
}

/// Unipotent map: identity plus strictly triangular linear plus higher.
fn random_unipotent(rng: &mut ChaCha12Rng, n: usize, ord: usize) -> DiffeoJet {
    let v = random_nilpotent(rng, n, ord);
    let comps = v
        .components()
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let mut j = Jet::variable(n, ord, k);
            j.add_assign(p);
            j
        })
        .collect();
    DiffeoJet::new(comps).unwrap()
}

struct Line {
    criterion: usize,
    pass: bool,
    detail: String,
}

fn line(criterion: usize, pass: bool, detail: String) -> Line {
    Line { criterion, pass, detail }
}

fn check_obstruction(g: &GlobalArgs) -> Line {
    let t0 = Instant::now();
    let cmd = Command::Counterexample(CounterexampleArgs { shift: 0, nu: None });
    let out = match dispatch(g, &cmd) {
        Ok(out) => out,
        Err(e) => return line(1, false, format!("command failed: {}", e.message)),
    };
    let elapsed = t0.elapsed().as_secs_f64();
    let r = &out.result;
    let rs = r["resonances"].as_array().map(Vec::len).unwrap_or(0);
    let value = (
        r["resonances"][0]["value"][0].as_f64().unwrap_or(f64::NAN),
        r["resonances"][0]["value"][1].as_f64().unwrap_or(f64::NAN),
    );
    let min_div = r["min_abs_divisor"].as_f64().unwrap_or(f64::NAN);
    let pass = out.exit == exit::OK
        && r["verdict"] == "Obstructed"
        && r["obstruction_reproduced"] == true
        && rs == 1
        && r["resonances"][0]["j"] == serde_json::json!([0, 2])
        && r["divisors_nonzero"] == true
        && (min_div - 0.25).abs() <= 1e-12
        && elapsed < OBSTRUCTION_BUDGET_S;
    line(
        1,
        pass,
        format!(
            "one negative resonance, value ({:.3e}, {:.3e}); divisors nonzero with min \
             {min_div:.3}; {elapsed:.2} s",
            value.0, value.1
        ),
    )
}

fn check_minimal_shift(g: &GlobalArgs) -> Line {
    let cmd = Command::Counterexample(CounterexampleArgs { shift: 1, nu: None });
    let out = match dispatch(g, &cmd) {
        Ok(out) => out,
        Err(e) => return line(7, false, format!("command failed: {}", e.message)),
    };
    let r = &out.result;
    let lin = r["holonomy_linear_error"].as_f64().unwrap_or(f64::NAN);
    let pass = out.exit == exit::OK
        && r["verdict"] == "Realizable"
        && lin <= HOLONOMY_LINEAR_BUDGET;
    line(
        7,
        pass,
        format!(
            "shift 1 realizable at nu {}; holonomy linear part off by {lin:.3e}",
            r["nu"]
        ),
    )
}

fn check_exp_log() -> Line {
    let tol = Tolerances::default();
    let mut rng = ChaCha12Rng::seed_from_u64(0xACCE_97);
    let mut jets = 0usize;
    let mut worst = 0.0f64;
    for n in 1..=3usize {
        for ord in 2..=5usize {
            for _ in 0..5 {
                let v = random_nilpotent(&mut rng, n, ord);
                let nil = match NilpotentVF::new(v.clone(), tol.mat) {
                    Ok(x) => x,
                    Err(e) => return line(3, false, format!("field rejected: {e}")),
                };
                match nil.exp(&tol).and_then(|u| u.log(&tol)) {
                    Ok(back) => worst = worst.max(back.field().max_diff(&v)),
                    Err(e) => return line(3, false, format!("exp/log failed: {e}")),
                }
                jets += 1;

                let f = random_unipotent(&mut rng, n, ord);
                let uni = match UnipotentJet::new(f.clone(), tol.mat) {
                    Ok(x) => x,
                    Err(e) => return line(3, false, format!("map rejected: {e}")),
                };
                match uni.log(&tol).and_then(|x| x.exp(&tol)) {
                    Ok(back) => worst = worst.max(back.map().max_diff(&f)),
                    Err(e) => return line(3, false, format!("log/exp failed: {e}")),
                }
                jets += 1;
            }
        }
    }
    let pass = jets >= EXP_LOG_MIN_JETS && worst <= EXP_LOG_BUDGET;
    line(3, pass, format!("{jets} jets round-tripped, worst drift {worst:.3e}"))
}

/// Decay of the gluing cocycle for a single degree-3 perturbation of the
/// scalar multiplier -1: fitted slope against the spectral prediction.
fn check_cocycle_decay() -> Result<(f64, f64), String> {
    let sys = SaddleSystem::linear(CMatrix::diag(&[c(-1.0, 0.0)])).map_err(|e| e.to_string())?;
    let mut comp = Jet::variable(1, 3, 0);
    comp.add_term(&[3], c(0.05, 0.0));
    let xi = DiffeoJet::new(vec![comp]).map_err(|e| e.to_string())?;
    let xs: Vec<f64> = (0..8).map(|i| 0.1 * 1.25f64.powi(i)).collect();
    let (slope, _) =
        cocycle_decay_fit(&sys, &xi, &xs, &[c(0.2, 0.0)], 1e-11).map_err(|e| e.to_string())?;
    let predicted = 0.95 * 3.0 - 1.05 - DECAY_SLACK;
    Ok((slope, predicted))
}

#[test]
fn acceptance_criteria() {
    let g = globals();
    let tol = g.tolerances();
    let mut lines = Vec::new();

    lines.push(check_obstruction(&g));
    lines.push(check_minimal_shift(&g));
    lines.push(check_exp_log());

    let corpus = generate_corpus(g.seed);
    let t0 = Instant::now();
    let jobs = std::thread::available_parallelism().map(|p| p.get()).unwrap_or(4);
    let jobs = jobs.min(corpus.len()).max(1);
    let mut slots: Vec<Option<Result<CaseReport, String>>> =
        (0..corpus.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let mut handles = Vec::with_capacity(jobs);
        for worker in 0..jobs {
            let corpus = &corpus;
            let tol = &tol;
            handles.push(scope.spawn(move || {
                let mut local = Vec::new();
                let mut i = worker;
                while i < corpus.len() {
                    local.push((i, run_case(&corpus[i], tol)));
                    i += jobs;
                }
                local
            }));
        }
        for h in handles {
            for (i, r) in h.join().expect("corpus worker panicked") {
                slots[i] = Some(r);
            }
        }
    });
    let corpus_elapsed = t0.elapsed().as_secs_f64();

    let mut reports = Vec::with_capacity(corpus.len());
    let mut first_error: Option<String> = None;
    for slot in slots {
        match slot.expect("missing corpus slot") {
            Ok(rep) => reports.push(rep),
            Err(e) => first_error = first_error.or(Some(e)),
        }
    }

    if let Some(err) = first_error {
        for n in [2usize, 4, 5, 6, 8] {
            lines.push(line(n, false, format!("corpus sweep failed: {err}")));
        }
    } else {
        let fmax = |f: fn(&CaseReport) -> f64| reports.iter().map(f).fold(0.0f64, f64::max);
        let round_trip = fmax(|r| r.round_trip);
        lines.push(line(
            2,
            round_trip <= ROUND_TRIP_BUDGET && corpus_elapsed < CORPUS_BUDGET_S,
            format!(
                "{} cases round trip with max coefficient gap {round_trip:.3e} in \
                 {corpus_elapsed:.1} s",
                reports.len()
            ),
        ));

        let nonres = fmax(|r| r.nonresonant_max);
        let conj = fmax(|r| r.conjugacy);
        lines.push(line(
            4,
            nonres <= NONRESONANT_BUDGET && conj <= CONJUGACY_BUDGET,
            format!(
                "largest surviving non-integer coefficient {nonres:.3e}; conjugacy identity \
                 off by {conj:.3e}"
            ),
        ));

        let pullback = fmax(|r| r.pullback);
        let bracket = fmax(|r| r.bracket);
        lines.push(line(
            5,
            pullback <= PULLBACK_BUDGET && bracket <= BRACKET_BUDGET,
            format!(
                "semisimple field moved by {pullback:.3e} under pullback; commutator norm \
                 {bracket:.3e}"
            ),
        ));

        let all_contract = reports.iter().all(|r| r.contraction_pass && r.exponent_in_window);
        let lo = reports.iter().map(|r| r.exponent).fold(f64::INFINITY, f64::min);
        let hi = fmax(|r| r.exponent);
        match check_cocycle_decay() {
            Ok((slope, predicted)) => lines.push(line(
                6,
                all_contract && slope >= predicted,
                format!(
                    "fitted exponents in [{lo:.2}, {hi:.2}] inside padded spectral windows; \
                     cocycle decay slope {slope:.2} vs predicted {predicted:.2}"
                ),
            )),
            Err(e) => lines.push(line(6, false, format!("cocycle fit failed: {e}"))),
        }

        let richardson = fmax(|r| r.richardson);
        let reversal = fmax(|r| r.reversal);
        let budget = 10.0 * RICHARDSON_TOL;
        lines.push(line(
            8,
            richardson <= budget && reversal <= budget,
            format!(
                "tolerance halving moved jets by {richardson:.3e}; reversal composition off \
                 by {reversal:.3e} (budget {budget:.1e})"
            ),
        ));
    }

    lines.sort_by_key(|l| l.criterion);
    let mut all_pass = true;
    let mut rendered = String::new();
    for l in &lines {
        let status = if l.pass { "PASS" } else { "FAIL" };
        let text = format!("criterion {}: {status} | {}", l.criterion, l.detail);
        println!("{text}");
        rendered.push_str(&text);
        rendered.push('\n');
        all_pass &= l.pass;
    }
    assert!(all_pass, "acceptance gate failed:\n{rendered}");
}
