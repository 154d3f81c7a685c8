//! Subcommand implementations. Every command stages its artifacts in an
//! `OutputSet` (committed by the caller on success) so failures leave the
//! output directory untouched.

use serde_json::{json, Value};

use subflow_core::assumptions::AssumptionReport;
use subflow_core::flow::{CylFunction, RoofVector};
use subflow_core::perron::{CharPoly, EigenSystem, VandermondeData, DEFAULT_EIGEN_TOL};
use subflow_core::spectral::{orbit_for_scales, strichartz_sup, sup_envelope, twisted_ensemble};
use subflow_core::substitution::ReturnWord;
use subflow_core::util::golden_offsets;
use subflow_core::{
    char_poly_analysis, dimension_bound, discrepancy_fit, ek_trace, ekn_membership, eigen_system,
    exponent_budget, orbit_correlation, param_point, product_correlation_decay,
    validate_assumptions, vandermonde_constants, varr_certificate, Complex64, CorrelationMode,
    Error, HolderCertificate, Irreducibility, PartnerFlow, StepFunction, Substitution,
};

use crate::config::{Command, ExperimentConfig, PartnerSpec, RoofSpec};
use crate::output::{fmt_f64, CsvBuilder, OutputSet};

pub struct Context {
    pub cfg: ExperimentConfig,
    pub subst: Substitution,
    pub report: AssumptionReport,
    pub hash: String,
}

impl Context {
    pub fn new(cfg: ExperimentConfig) -> Result<Self, Error> {
        let subst = match &cfg.substitution {
            Value::String(text) => Substitution::parse(text)?,
            other => Substitution::from_json(other)?,
        };
        let report = validate_assumptions(&subst, cfg.complexity_depth, cfg.cap)?;
        let hash = cfg.config_hash();
        Ok(Context {
            cfg,
            subst,
            report,
            hash,
        })
    }

    /// Eigen data gated on the standing hypotheses.
    fn eigen_checked(&self) -> Result<EigenSystem, Error> {
        if !self.report.all_hold() {
            return Err(Error::AssumptionViolation(self.report.violation_message()));
        }
        eigen_system(&self.subst.matrix(), DEFAULT_EIGEN_TOL)
    }

    fn roof(&self, es: &EigenSystem) -> Result<RoofVector, Error> {
        match &self.cfg.roof {
            RoofSpec::Perron => RoofVector::perron(es),
            RoofSpec::Explicit { s } => {
                if s.len() != self.subst.alphabet_size() {
                    return Err(Error::InvalidParameter(format!(
                        "roof has {} entries, alphabet has {}",
                        s.len(),
                        self.subst.alphabet_size()
                    )));
                }
                RoofVector::explicit(s.clone())
            }
            RoofSpec::Random { seed, floor } => {
                RoofVector::random_with_floor(self.subst.alphabet_size(), *seed, *floor)
            }
        }
    }

    fn function(&self, es: &EigenSystem, roof: &RoofVector) -> Result<CylFunction, Error> {
        let freq = es.letter_frequencies();
        match &self.cfg.function {
            None => CylFunction::default_mean_zero(roof, &freq),
            Some(spec) => CylFunction::from_json(spec, &self.subst, roof, &freq),
        }
    }

    fn return_word(&self) -> Result<ReturnWord, Error> {
        if !self.report.primitive {
            return Err(Error::AssumptionViolation(
                "return words need a primitive substitution".into(),
            ));
        }
        self.subst.find_return_word(self.cfg.ell_max)
    }
}

pub fn dispatch(ctx: &Context) -> Result<OutputSet, Error> {
    let mut out = OutputSet::new();
    out.add_json("resolved_config.json", &ctx.cfg.resolved_json());
    match ctx.cfg.command {
        Command::Analyze => analyze(ctx, &mut out)?,
        Command::ReturnWord => return_word(ctx, &mut out)?,
        Command::Spectrum => {
            spectrum(ctx, &mut out)?;
        }
        Command::Ek => ek(ctx, &mut out)?,
        Command::Discrepancy => discrepancy(ctx, &mut out)?,
        Command::Product => product(ctx, &mut out)?,
        Command::Certify => certify(ctx, &mut out)?,
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

fn complex_json(z: &Complex64) -> Value {
    json!({"re": z.re, "im": z.im, "abs": z.norm()})
}

fn analyze(ctx: &Context, out: &mut OutputSet) -> Result<(), Error> {
    let r = &ctx.report;
    let report = json!({
        "substitution": ctx.subst.to_string(),
        "alphabet_size": ctx.subst.alphabet_size(),
        "matrix": ctx.subst.matrix(),
        "primitive": r.primitive,
        "primitivity_power": r.primitivity_power,
        "aperiodic_heuristic": r.aperiodic_heuristic,
        "complexity_profile": r.complexity_profile,
        "char_poly": r.char_poly.to_string_pretty(),
        "char_poly_coeffs": r.char_poly.coeffs.iter().map(|c| c.to_string()).collect::<Vec<_>>(),
        "irreducibility": match r.irreducibility {
            Irreducibility::Irreducible => "irreducible",
            Irreducibility::Reducible => "reducible",
            Irreducibility::Unknown => "unknown",
        },
        "char_poly_irreducible": r.char_poly_irreducible,
        "second_eigenvalue_expanding": r.second_eigenvalue_expanding,
        "theta": r.theta,
        "theta2_abs": r.theta2_abs,
        "beta": r.beta,
        "eigenvalues": r.eigenvalues.as_ref().map(|vs| vs.iter().map(complex_json).collect::<Vec<_>>()),
        "all_hypotheses_hold": r.all_hold(),
        "config_hash": ctx.hash,
    });
    out.add_json("report.json", &report);

    let mut csv = CsvBuilder::new(&["j", "re", "im", "abs"]);
    if let Some(values) = &r.eigenvalues {
        for (j, z) in values.iter().enumerate() {
            csv.row(&[
                (j + 1).to_string(),
                fmt_f64(z.re),
                fmt_f64(z.im),
                fmt_f64(z.norm()),
            ]);
        }
    }
    out.add("eigen.csv", csv.finish(&ctx.hash));
    Ok(())
}

// ---------------------------------------------------------------------------
// return-word
// ---------------------------------------------------------------------------

fn return_word(ctx: &Context, out: &mut OutputSet) -> Result<(), Error> {
    let rw = ctx.return_word()?;
    let doc = json!({
        "v": ctx.subst.render(&rw.v),
        "c": ctx.subst.letters()[rw.c as usize].to_string(),
        "ell": rw.ell,
        "config_hash": ctx.hash,
    });
    out.add_json("return_word.json", &doc);
    Ok(())
}

// ---------------------------------------------------------------------------
// spectrum (also the certificate stage of certify)
// ---------------------------------------------------------------------------

struct SpectrumResult {
    worst: HolderCertificate,
}

fn certificate_json(cert: &HolderCertificate) -> Value {
    json!({
        "omega": cert.omega,
        "gamma": cert.gamma,
        "C1": cert.c1,
        "R0": cert.r0,
        "r_max": cert.r_max,
        "fit_residual": cert.fit_residual,
    })
}

fn spectrum(ctx: &Context, out: &mut OutputSet) -> Result<SpectrumResult, Error> {
    let es = ctx.eigen_checked()?;
    let roof = ctx.roof(&es)?;
    let f = ctx.function(&es, &roof)?;
    let omegas = ctx.cfg.grids.omega.resolve();
    let rs = ctx.cfg.grids.r.resolve(es.theta);
    if rs.len() < 9 {
        return Err(Error::InvalidParameter(
            "spectrum needs an R ladder with at least 9 points (8 windows)".into(),
        ));
    }
    let r_top = *rs.last().unwrap();
    let orbit = orbit_for_scales(&ctx.subst, &roof, r_top, r_top, ctx.cfg.cap)?;
    let mass_offsets = golden_offsets(ctx.cfg.seeds.master, ctx.cfg.samples, r_top);
    let sup_offsets = golden_offsets(ctx.cfg.seeds.master, ctx.cfg.sup_samples, r_top);

    let mut mass_csv = CsvBuilder::new(&["omega", "R", "G"]);
    let mut sup_csv = CsvBuilder::new(&["omega", "R", "supS"]);
    let mut per_omega = Vec::new();
    let mut worst: Option<HolderCertificate> = None;
    for &omega in &omegas {
        let ens = twisted_ensemble(&orbit, &f, omega, &mass_offsets, &rs)?;
        for (i, g) in ens.fejer_mean().iter().enumerate() {
            mass_csv.row(&[fmt_f64(omega), fmt_f64(rs[i]), fmt_f64(*g)]);
        }
        let sup = sup_envelope(&orbit, &f, omega, &sup_offsets, &rs)?;
        for &(r, s) in &sup {
            sup_csv.row(&[fmt_f64(omega), fmt_f64(r), fmt_f64(s)]);
        }
        // Onset scan: earliest R0 whose tail fit reaches residual < 0.1 with
        // at least 8 windows; otherwise the best-residual onset.
        let mut best: Option<HolderCertificate> = None;
        for start in 0..=sup.len().saturating_sub(8) {
            match varr_certificate(&sup[start..], sup[start].0, omega) {
                Ok(cert) => {
                    if best.is_none_or(|b| cert.fit_residual < b.fit_residual) {
                        best = Some(cert);
                    }
                    if cert.fit_residual < 0.1 {
                        break;
                    }
                }
                Err(Error::NoDecay { .. }) => continue,
                Err(e) => return Err(e),
            }
        }
        let cert = best.ok_or(Error::NoDecay { gamma: 0.0 })?;
        if worst.is_none_or(|w| cert.gamma < w.gamma) {
            worst = Some(cert);
        }
        per_omega.push(certificate_json(&cert));
    }
    let worst = worst.ok_or(Error::NoDecay { gamma: 0.0 })?;
    out.add("mass.csv", mass_csv.finish(&ctx.hash));
    out.add("sup.csv", sup_csv.finish(&ctx.hash));
    let mut doc = certificate_json(&worst);
    doc["per_omega"] = Value::Array(per_omega);
    doc["roof"] = json!(roof.values());
    doc["lip_norm"] = json!(f.lip_norm());
    doc["config_hash"] = json!(ctx.hash);
    out.add_json("certificate.json", &doc);
    Ok(SpectrumResult { worst })
}

// ---------------------------------------------------------------------------
// ek
// ---------------------------------------------------------------------------

fn ek_context(
    ctx: &Context,
) -> Result<
    (
        EigenSystem,
        RoofVector,
        CharPoly,
        VandermondeData,
        subflow_core::ParamPoint,
    ),
    Error,
> {
    let es = ctx.eigen_checked()?;
    let roof = ctx.roof(&es)?;
    let (cp, _) = char_poly_analysis(&ctx.subst.matrix());
    let vd = vandermonde_constants(&es)?;
    let v = ctx.return_word()?;
    let p = param_point(&ctx.subst, &v, roof.values(), &es)?;
    Ok((es, roof, cp, vd, p))
}

fn ek(ctx: &Context, out: &mut OutputSet) -> Result<(), Error> {
    let (es, roof, cp, vd, p) = ek_context(ctx)?;
    let g = &ctx.cfg.grids.ek;
    let omegas = ctx.cfg.grids.omega.resolve();
    let rho = g.rho.unwrap_or(vd.rho);

    // Trace of the first omega.
    let trace = ek_trace(omegas[0], &p, &es, &cp, &vd, g.n)?;
    let mut trace_csv = CsvBuilder::new(&["n", "x_n", "K_n", "eps_n"]);
    for i in 0..trace.len() {
        trace_csv.row(&[
            (i + 1).to_string(),
            fmt_f64(trace.x[i]),
            trace.k_seq[i].to_string(),
            fmt_f64(trace.eps[i]),
        ]);
    }
    out.add("ek.csv", trace_csv.finish(&ctx.hash));

    // Membership statistics per omega.
    let m = es.m;
    let mut header: Vec<String> = vec!["omega".into()];
    header.extend((1..=m).map(|j| format!("s{j}")));
    header.extend(["bad_count".into(), "member".into(), "n_min_ok".into()]);
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut stats_csv = CsvBuilder::new(&header_refs);
    for &omega in &omegas {
        let st = ekn_membership(
            &p,
            &es,
            &cp,
            &vd,
            omega,
            rho,
            g.n,
            ctx.cfg.constants.k,
            g.b,
            ctx.cfg.constants.n_min_factor,
        )?;
        let mut row = vec![fmt_f64(omega)];
        row.extend(roof.values().iter().map(|&s| fmt_f64(s)));
        row.push(st.bad_count.to_string());
        row.push(st.member.to_string());
        row.push(st.n_min_satisfied.to_string());
        stats_csv.row(&row);
    }
    out.add("ekstats.csv", stats_csv.finish(&ctx.hash));

    // Dimension-bound sweep.
    let mut dim_csv = CsvBuilder::new(&["k", "Upsilon", "eta_max"]);
    for &k in &g.k_list {
        for &ups in &g.upsilon_list {
            let eta = dimension_bound(k, ups, &es, &vd)?;
            dim_csv.row(&[
                k.to_string(),
                fmt_f64(ups),
                eta.map_or("inf".to_string(), fmt_f64),
            ]);
        }
    }
    out.add("dimension.csv", dim_csv.finish(&ctx.hash));

    // Cover bookkeeping along N.
    let mut cover_csv = CsvBuilder::new(&["N", "ln_count", "ln_radius", "ln_series"]);
    let n_lo = (m + 1).max(g.cover_k as usize);
    for n in n_lo..=g.n {
        let cb = subflow_core::cover_budget(
            n,
            g.cover_k,
            g.b.round() as u64,
            &es,
            &vd,
            g.cover_eta,
        )?;
        cover_csv.row(&[
            n.to_string(),
            fmt_f64(cb.ln_ball_count),
            fmt_f64(cb.ln_ball_radius),
            fmt_f64(cb.ln_series_term),
        ]);
    }
    out.add("cover.csv", cover_csv.finish(&ctx.hash));
    Ok(())
}

// ---------------------------------------------------------------------------
// discrepancy
// ---------------------------------------------------------------------------

fn discrepancy(ctx: &Context, out: &mut OutputSet) -> Result<(), Error> {
    let es = ctx.eigen_checked()?;
    let freq = es.letter_frequencies();
    let step = match &ctx.cfg.step {
        None => {
            let mut base = vec![0.0; ctx.subst.alphabet_size()];
            base[0] = 1.0;
            StepFunction::mean_zero_from(&base, &freq)
        }
        Some(spec) => {
            if spec.d.len() != ctx.subst.alphabet_size() {
                return Err(Error::InvalidParameter(
                    "step weights must have one entry per letter".into(),
                ));
            }
            if spec.project_mean_zero {
                StepFunction::mean_zero_from(&spec.d, &freq)
            } else {
                StepFunction::new(
                    spec.d
                        .iter()
                        .map(|&x| Complex64::new(x, 0.0))
                        .collect(),
                    &freq,
                )
            }
        }
    };
    let n_max = ctx.cfg.grids.n.max;
    let fit_range = (
        ctx.cfg.fit.r_min.unwrap_or(n_max as f64 / 1000.0),
        ctx.cfg.fit.r_max.unwrap_or(n_max as f64),
    );
    let (series, fit) = discrepancy_fit(
        &step,
        &ctx.subst,
        &es,
        &ctx.report,
        n_max,
        fit_range,
        false,
        ctx.cfg.cap,
    )?;
    let (_, fit_lc) = discrepancy_fit(
        &step,
        &ctx.subst,
        &es,
        &ctx.report,
        n_max,
        fit_range,
        true,
        ctx.cfg.cap,
    )?;

    let mut csv = CsvBuilder::new(&["N", "D", "slope_running"]);
    let pts = series.points();
    for (i, &(n, d)) in pts.iter().enumerate() {
        let slope = if i == 0 {
            "nan".to_string()
        } else {
            let dy = d.ln() - pts[i - 1].1.ln();
            let dx = n.ln() - pts[i - 1].0.ln();
            fmt_f64(dy / dx)
        };
        csv.row(&[fmt_f64(n), fmt_f64(d), slope]);
    }
    out.add("discrepancy.csv", csv.finish(&ctx.hash));
    out.add_json(
        "discrepancy.json",
        &json!({
            "beta": es.beta,
            "nu": es.nu_plus_1 - 1,
            "slope": fit.slope,
            "slope_log_corrected": fit_lc.slope,
            "residual": fit.residual,
            "n_max": n_max,
            "fit_range": [fit_range.0, fit_range.1],
            "d": step.d.iter().map(|z| z.re).collect::<Vec<_>>(),
            "config_hash": ctx.hash,
        }),
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// product
// ---------------------------------------------------------------------------

fn product(ctx: &Context, out: &mut OutputSet) -> Result<(), Error> {
    let es = ctx.eigen_checked()?;
    let roof = ctx.roof(&es)?;
    let f = ctx.function(&es, &roof)?;
    let t = &ctx.cfg.grids.t;
    let window = t.window.unwrap_or(10.0 * t.max);
    let table = orbit_correlation(
        &ctx.subst,
        &f,
        &roof,
        t.max,
        t.step,
        window,
        ctx.cfg.samples,
        ctx.cfg.seeds.master,
        ctx.cfg.cap,
        CorrelationMode::Auto,
    )?;
    let partner = match ctx.cfg.partner {
        PartnerSpec::CircleRotation { frequency } => PartnerFlow::CircleRotation { frequency },
        PartnerSpec::TorusLinear { f1, f2 } => PartnerFlow::TorusLinear { f1, f2 },
    };
    let r_grid: Vec<f64> = ctx
        .cfg
        .grids
        .r
        .resolve(es.theta)
        .into_iter()
        .filter(|&r| r <= t.max)
        .collect();
    if r_grid.len() < 8 {
        return Err(Error::InvalidParameter(
            "product needs >= 8 R values within the correlation range; raise grids.t.max".into(),
        ));
    }
    let fit_range = (
        ctx.cfg.fit.r_min.unwrap_or(r_grid[0]),
        ctx.cfg.fit.r_max.unwrap_or(*r_grid.last().unwrap()),
    );
    let pc = product_correlation_decay(&table, &partner, &r_grid, Some(fit_range))?;

    let mut corr_csv = CsvBuilder::new(&["t", "re", "im"]);
    for (k, v) in table.values.iter().enumerate() {
        corr_csv.row(&[fmt_f64(k as f64 * table.dt), fmt_f64(v.re), fmt_f64(v.im)]);
    }
    out.add("correlation.csv", corr_csv.finish(&ctx.hash));

    let slopes = pc.running_slopes();
    let mut prod_csv = CsvBuilder::new(&["R", "re_I", "im_I", "abs_I", "running_slope"]);
    for (i, &r) in pc.r_grid.iter().enumerate() {
        prod_csv.row(&[
            fmt_f64(r),
            fmt_f64(pc.values[i].re),
            fmt_f64(pc.values[i].im),
            fmt_f64(pc.values[i].norm()),
            fmt_f64(slopes[i]),
        ]);
    }
    out.add("product.csv", prod_csv.finish(&ctx.hash));

    let cs_ok = pc
        .values
        .iter()
        .zip(&pc.cs_bound)
        .all(|(v, &b)| v.norm() <= b * (1.0 + 1e-12));
    let alpha_emp = 1.0 - pc.fit.slope;
    // The theoretical lower bound on the decay quality from the exponent
    // budget: |I(R)| <= C R^{1 - gamma/2}.
    let vd = vandermonde_constants(&es)?;
    let c = &ctx.cfg.constants;
    let budget = exponent_budget(&es, &vd, c.k, c.upsilon, c.c1, c.beta_tilde).ok();
    let theory_alpha = budget.as_ref().map(|b| b.product_exponent);
    // Strichartz sup functional at the budget gamma over grids inside the
    // covered correlation range.
    let strichartz = budget.as_ref().map(|b| {
        let half = 0.5 * t.max;
        let ys: Vec<f64> = (0..=40).map(|i| -half + half * i as f64 / 20.0).collect();
        let rs: Vec<f64> = (0..=40).map(|i| 1.0 + (half - 1.0) * i as f64 / 40.0).collect();
        strichartz_sup(&table, b.gamma_final, &ys, &rs)
    });
    out.add_json(
        "product.json",
        &json!({
            "partner_frequency": partner.effective_frequency(),
            "slope": pc.fit.slope,
            "residual": pc.fit.residual,
            "alpha_emp": alpha_emp,
            "theory_alpha": theory_alpha,
            "alpha_emp_ge_theory": theory_alpha.map(|t| alpha_emp >= t),
            "lip_norm": f.lip_norm(),
            "cauchy_schwarz_ok": cs_ok,
            "strichartz_sup_at_gamma": strichartz,
            "fit_range": [fit_range.0, fit_range.1],
            "config_hash": ctx.hash,
        }),
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// certify
// ---------------------------------------------------------------------------

fn certify(ctx: &Context, out: &mut OutputSet) -> Result<(), Error> {
    analyze(ctx, out)?;
    let spec_result = spectrum(ctx, out)?;
    let es = ctx.eigen_checked()?;
    let vd = vandermonde_constants(&es)?;
    let c = &ctx.cfg.constants;
    let budget = exponent_budget(&es, &vd, c.k, c.upsilon, c.c1, c.beta_tilde)?;
    out.add_json(
        "budget.json",
        &json!({
            "rho": budget.rho,
            "L": budget.big_l,
            "k": budget.k,
            "upsilon": budget.upsilon,
            "c1": budget.c1,
            "alpha_twist": budget.alpha_twist,
            "Z": budget.z,
            "gamma_tilde": budget.gamma_tilde,
            "beta": budget.beta,
            "beta_tilde": budget.beta_tilde,
            "gamma_final": budget.gamma_final,
            "product_exponent": budget.product_exponent,
            "config_hash": ctx.hash,
        }),
    );
    let worst = &spec_result.worst;
    out.add_json(
        "certify.json",
        &json!({
            "empirical_gamma": worst.gamma,
            "empirical_residual": worst.fit_residual,
            "empirical_omega_star": worst.omega,
            "theory_gamma_final": budget.gamma_final,
            "empirical_ge_theory": worst.gamma >= budget.gamma_final,
            "config_hash": ctx.hash,
        }),
    );
    Ok(())
}
