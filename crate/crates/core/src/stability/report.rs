use std::fmt::Write;

use super::{Condition, CriticalDiffusion, DispersionTable, RouthHurwitz, StabilityReport, TuringPair};

fn critical_str(c: &Option<CriticalDiffusion>) -> String {
    match c {
        Some(CriticalDiffusion::Finite(d)) => format!("{d:.6}"),
        Some(CriticalDiffusion::Unbounded) => "inf".into(),
        None => "n/a".into(),
    }
}

fn condition_row(out: &mut String, group: &str, c: &Condition) {
    let _ = writeln!(
        out,
        "{group},{},{:.12e},{},{}",
        c.name,
        c.value,
        c.inequality(),
        c.outcome.as_str()
    );
}

fn homogeneous_rows(out: &mut String, group: &str, rh: &RouthHurwitz) {
    for c in &rh.conditions {
        condition_row(out, group, c);
    }
    for (name, v) in [
        ("trace_full", rh.trace_full),
        ("trace_bulk", rh.trace_bulk),
        ("trace_surf", rh.trace_surf),
        ("det_bulk", rh.det_bulk),
        ("det_surf", rh.det_surf),
        ("alt_cond5", rh.alt_cond5),
        ("alt_cond6", rh.alt_cond6),
        ("max_re_eigenvalue", rh.max_real_eigenvalue()),
    ] {
        let _ = writeln!(out, "{group},{name},{v:.12e},,");
    }
}

fn turing_rows(out: &mut String, group: &str, t: &TuringPair) {
    condition_row(out, group, &t.linear);
    condition_row(out, group, &t.discriminant);
}

/// One row per evaluated quantity: `group,name,value,requirement,outcome`.
pub fn report_csv(r: &StabilityReport) -> String {
    let mut out = String::from("group,name,value,requirement,outcome\n");
    homogeneous_rows(&mut out, "homogeneous", &r.homogeneous);
    homogeneous_rows(&mut out, "homogeneous_uncoupled", &r.homogeneous_uncoupled);
    turing_rows(&mut out, "turing_bulk", &r.turing_bulk);
    turing_rows(&mut out, "turing_surf", &r.turing_surf);
    turing_rows(&mut out, "turing_surf_uncoupled", &r.turing_surf_uncoupled);
    for (name, c) in [
        ("critical_bulk", &r.critical_bulk),
        ("critical_surf", &r.critical_surf),
        ("critical_surf_uncoupled", &r.critical_surf_uncoupled),
    ] {
        let _ = writeln!(out, "critical,{name},{},,", critical_str(c));
    }
    let _ = writeln!(out, "regime,regime,{},,", r.regime);
    let _ = writeln!(out, "regime,regime_uncoupled,{},,", r.regime_uncoupled);
    out
}

fn text_homogeneous(out: &mut String, title: &str, rh: &RouthHurwitz) {
    let _ = writeln!(out, "{title}");
    let _ = writeln!(
        out,
        "  Tr = {:.6e}  Tr_bulk = {:.6e}  Tr_surf = {:.6e}",
        rh.trace_full, rh.trace_bulk, rh.trace_surf
    );
    let _ = writeln!(
        out,
        "  Det_bulk = {:.6e}  Det_surf = {:.6e}",
        rh.det_bulk, rh.det_surf
    );
    let q = &rh.coeffs;
    let _ = writeln!(
        out,
        "  quartic: a1 = {:.6e}  a2 = {:.6e}  a3 = {:.6e}  a4 = {:.6e}",
        q.a1, q.a2, q.a3, q.a4
    );
    for c in &rh.conditions {
        let _ = writeln!(
            out,
            "  {:<6} {:>16.6e} {}  {}",
            c.name,
            c.value,
            c.inequality(),
            c.outcome.as_str()
        );
    }
    if rh.zero_eigenvalue {
        let _ = writeln!(out, "  marginal: zero eigenvalue (a4 = 0)");
    }
    let eig: Vec<String> = rh
        .eigenvalues
        .iter()
        .map(|z| format!("{:.6e}{:+.6e}i", z.re, z.im))
        .collect();
    let _ = writeln!(out, "  eigenvalues: {}", eig.join(", "));
}

fn text_turing(out: &mut String, title: &str, t: &TuringPair) {
    let _ = writeln!(
        out,
        "  {title:<24} d = {:<8} d*f_u+g_v = {:>12.6e} ({})  discriminant = {:>12.6e} ({})",
        t.d,
        t.linear.value,
        t.linear.outcome.as_str(),
        t.discriminant.value,
        t.discriminant.outcome.as_str()
    );
}

/// Human-readable summary of a stability report.
pub fn report_text(r: &StabilityReport) -> String {
    let mut out = String::new();
    let s = &r.steady;
    let _ = writeln!(
        out,
        "steady state: u* = {}  v* = {}  r* = {}  s* = {}",
        s.u_star, s.v_star, s.r_star, s.s_star
    );
    text_homogeneous(&mut out, "homogeneous stability (with exchange terms)", &r.homogeneous);
    text_homogeneous(
        &mut out,
        "homogeneous stability (surface kinetics alone)",
        &r.homogeneous_uncoupled,
    );
    let _ = writeln!(out, "diffusion-driven instability");
    text_turing(&mut out, "bulk", &r.turing_bulk);
    text_turing(&mut out, "surface", &r.turing_surf);
    text_turing(&mut out, "surface (uncoupled)", &r.turing_surf_uncoupled);
    let _ = writeln!(out, "critical diffusion");
    let _ = writeln!(out, "  bulk                     {}", critical_str(&r.critical_bulk));
    let _ = writeln!(out, "  surface                  {}", critical_str(&r.critical_surf));
    let _ = writeln!(
        out,
        "  surface (uncoupled)      {}",
        critical_str(&r.critical_surf_uncoupled)
    );
    let _ = writeln!(out, "predicted regime: {}", r.regime);
    let _ = writeln!(out, "predicted regime (uncoupled surface): {}", r.regime_uncoupled);
    out
}

/// One row per mode.
pub fn dispersion_csv(t: &DispersionTable) -> String {
    let mut out = String::from(
        "l,k2,tr_bulk,det_bulk,re_bulk_1,im_bulk_1,re_bulk_2,im_bulk_2,max_re_bulk,\
         tr_surf,det_surf,re_surf_1,im_surf_1,re_surf_2,im_surf_2,max_re_surf\n",
    );
    for r in &t.rows {
        let [b1, b2] = r.lambda_bulk;
        let [s1, s2] = r.lambda_surf;
        let _ = writeln!(
            out,
            "{},{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},\
             {:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
            r.l,
            r.k2,
            r.tr_bulk,
            r.det_bulk,
            b1.re,
            b1.im,
            b2.re,
            b2.im,
            r.max_re_bulk,
            r.tr_surf,
            r.det_surf,
            s1.re,
            s1.im,
            s2.re,
            s2.im,
            r.max_re_surf
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetics::ModelParams;
    use crate::stability::{classify_regime, dispersion_scan_for};

    #[test]
    fn csv_has_one_row_per_condition() {
        let r = classify_regime(&ModelParams::reference(1.0, 20.0)).unwrap();
        let csv = report_csv(&r);
        let cond_rows = csv.lines().filter(|l| l.contains(",cond")).count();
        assert_eq!(cond_rows, 12);
        assert!(csv.contains("critical,critical_surf_uncoupled,8.567"));
        assert!(report_text(&r).contains("predicted regime"));
    }

    #[test]
    fn dispersion_csv_rows() {
        let t = dispersion_scan_for(&ModelParams::reference(20.0, 20.0), false, 50).unwrap();
        let csv = dispersion_csv(&t);
        assert_eq!(csv.lines().count(), 52);
        let header_cols = csv.lines().next().unwrap().split(',').count();
        assert!(csv.lines().all(|l| l.split(',').count() == header_cols));
    }
}
