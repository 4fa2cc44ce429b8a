use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use bichroma::dirac::{fit_dirac, gap_consistency, DiracParams};
use bichroma::dynamics::{
    run_klein_scenario, slater_oracle, write_trajectory, BandOperator, Envelope, KleinRun, KleinScenario,
};
use bichroma::lattice::{approximate_gap, compute_band_structure, fmt_sig, BandStructure};
use bichroma::wannier::{
    fix_gauge, linear_potential_table_with, wannier_from_table, WannierFunction, WannierSettings,
    MATRIX_TABLE_HEADER,
};
use bichroma::{LatticeParams, PlaneWaveBasis, SpatialGrid};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::Failure;

type Report = Result<Vec<String>, Failure>;

fn create(dir: &Path, name: &str, cfg: &RunConfig, extra: &[String]) -> Result<BufWriter<File>, Failure> {
    let mut w = BufWriter::new(File::create(dir.join(name))?);
    for line in cfg.header().iter().chain(extra) {
        writeln!(w, "# {line}")?;
    }
    Ok(w)
}

pub fn write_report(cfg: &RunConfig, dir: &Path, report: &[String]) -> Result<(), Failure> {
    let mut w = create(dir, "report.txt", cfg, &[])?;
    for line in report {
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

fn lattice(cfg: &RunConfig, phi: f64) -> Result<LatticeParams, Failure> {
    Ok(LatticeParams::new(cfg.f64("v1")?, cfg.f64("v2")?, phi)?)
}

fn basis(cfg: &RunConfig) -> Result<PlaneWaveBasis, Failure> {
    Ok(PlaneWaveBasis::new(cfg.usize("cutoff")?)?)
}

fn kv(key: &str, value: f64) -> String {
    format!("{key}={}", fmt_sig(value))
}

fn flag(key: &str, ok: bool) -> String {
    format!("{key}={}", if ok { "pass" } else { "fail" })
}

/// Minimum of `E_2 - E_1` over the zone.
fn min_gap(bands: &BandStructure) -> f64 {
    bands.gaps(1).into_iter().fold(f64::INFINITY, f64::min)
}

pub fn bands(cfg: &RunConfig, out: &Path) -> Report {
    let phis = cfg.f64_list("phi")?;
    let (nk, nb, b) = (cfg.usize("n_kappas")?, cfg.usize("n_bands")?, basis(cfg)?);
    let params = phis.iter().map(|&p| lattice(cfg, p)).collect::<Result<Vec<_>, _>>()?;
    let all = params
        .par_iter()
        .map(|p| compute_band_structure(p, nk, nb, &b))
        .collect::<Result<Vec<_>, _>>()?;
    let mut report = Vec::new();
    for (i, (p, bs)) in params.iter().zip(&all).enumerate() {
        let mut w = create(out, &format!("bands_{i:02}.csv"), cfg, &[format!("phi={}", fmt_sig(p.phi()))])?;
        bs.write_csv(&mut w)?;
        w.flush()?;
        let mut w = create(out, &format!("eigenvectors_{i:02}.txt"), cfg, &[format!("phi={}", fmt_sig(p.phi()))])?;
        bs.write_eigenvectors(&mut w)?;
        w.flush()?;
        let tag = format!("phi[{i}]");
        report.push(kv(&format!("{tag}.phi"), p.phi()));
        if nb >= 3 {
            let i0 = bs.center_index();
            report.push(kv(&format!("{tag}.gap_center"), bs.energy(2, i0) - bs.energy(1, i0)));
            report.push(kv(&format!("{tag}.gap_min"), min_gap(bs)));
            report.push(kv(&format!("{tag}.gap_approx"), approximate_gap(p)));
        }
        if p.v1() == 0.0 && p.v2() == 0.0 {
            report.push(kv(&format!("{tag}.free_deviation"), free_deviation(bs)));
        }
    }
    Ok(report)
}

/// Largest deviation from the folded parabolas `(kappa + 2n)^2`.
fn free_deviation(bs: &BandStructure) -> f64 {
    let mut worst = 0.0f64;
    for (k, &kappa) in bs.kappas().iter().enumerate() {
        let mut levels: Vec<f64> = (-20i32..=20).map(|n| (kappa + 2.0 * n as f64).powi(2)).collect();
        levels.sort_by(f64::total_cmp);
        for a in 0..bs.n_bands() {
            worst = worst.max((bs.energy(a, k) - levels[a]).abs());
        }
    }
    worst
}

pub fn fit_sweep(cfg: &RunConfig, out: &Path) -> Report {
    let phis = cfg.f64_list("phi")?;
    let (nk, window, b) = (cfg.usize("n_kappas")?, cfg.f64("window")?, basis(cfg)?);
    let params = phis.iter().map(|&p| lattice(cfg, p)).collect::<Result<Vec<_>, _>>()?;
    let fits = params
        .par_iter()
        .map(|p| {
            let bs = compute_band_structure(p, nk, 4, &b)?;
            let fit = fit_dirac(&bs, window)?;
            Ok((fit, gap_consistency(&fit, &bs)))
        })
        .collect::<Result<Vec<(DiracParams, f64)>, bichroma::Error>>()?;
    let mut w = create(out, "fit_sweep.csv", cfg, &[])?;
    writeln!(w, "phi,mc2,c,E_D,residual")?;
    for (p, (f, _)) in params.iter().zip(&fits) {
        writeln!(
            w,
            "{},{},{},{},{}",
            fmt_sig(p.phi()),
            fmt_sig(f.mass_energy),
            fmt_sig(f.speed),
            fmt_sig(f.offset),
            fmt_sig(f.fit_residual)
        )?;
    }
    w.flush()?;
    let mut report = Vec::new();
    for (i, (p, (f, gap))) in params.iter().zip(&fits).enumerate() {
        let tag = format!("phi[{i}]");
        report.push(kv(&format!("{tag}.phi"), p.phi()));
        report.push(kv(&format!("{tag}.mc2"), f.mass_energy));
        report.push(kv(&format!("{tag}.c"), f.speed));
        report.push(kv(&format!("{tag}.residual"), f.fit_residual));
        report.push(kv(&format!("{tag}.gap_minus_2mc2"), *gap));
        if f.is_flagged() {
            report.push(format!("{tag}.warning=fit residual above flag"));
        }
    }
    let mass: Vec<f64> = fits.iter().map(|(f, _)| f.mass_energy).collect();
    let ordered = phis.windows(2).all(|w| w[0] < w[1]) && phis.iter().all(|&p| (0.0..=PI + 1e-12).contains(&p));
    if ordered {
        report.push(flag("mc2_monotone", mass.windows(2).all(|w| w[1] < w[0])));
    }
    report.push(flag("c_positive", fits.iter().all(|(f, _)| f.speed > 0.0)));
    Ok(report)
}

pub fn wannier(cfg: &RunConfig, out: &Path) -> Report {
    let p = lattice(cfg, cfg.f64_list("phi")?[0])?;
    let bands_wanted = cfg.usize_list("bands")?;
    let max_site = cfg.usize("max_site")? as i64;
    let ppp = cfg.usize("grid_per_period")?;
    let n_bands = bands_wanted.iter().copied().max().unwrap_or(0) + 2;
    let bs = compute_band_structure(&p, cfg.usize("n_kappas")?, n_bands, &basis(cfg)?)?;
    let grid = SpatialGrid::lattice(cfg.usize("periods")?, ppp)?;
    let mut all: Vec<WannierFunction> = Vec::new();
    let mut report = Vec::new();
    let mut summary = create(out, "wannier_summary.csv", cfg, &[])?;
    writeln!(summary, "band,center,variance,tail_slope,decades_within_3d,tail_ratio_5d")?;
    let mut shift_residual = 0.0f64;
    for &a in &bands_wanted {
        let gauge = fix_gauge(&bs, a)?;
        let table = gauge.sample_table(ppp);
        let set = (-max_site..=max_site)
            .map(|n| wannier_from_table(&table, n, &grid))
            .collect::<Result<Vec<_>, _>>()?;
        let home = &set[max_site as usize];
        for w in &set {
            let name = format!("wannier_b{a}_n{}.csv", w.site);
            let mut f = create(out, &name, cfg, &[format!("band={a}"), format!("site={}", w.site)])?;
            w.write_csv(&mut f)?;
            f.flush()?;
            let shift = (w.site * ppp as i64) as isize;
            for i in 0..grid.len() as isize {
                let j = i - shift;
                if j >= 0 && (j as usize) < grid.len() {
                    shift_residual = shift_residual.max((w.samples[i as usize] - home.samples[j as usize]).norm());
                }
            }
        }
        writeln!(
            summary,
            "{a},{},{},{},{},{}",
            fmt_sig(home.center),
            fmt_sig(home.variance()),
            fmt_sig(home.tail_slope(2.0, 6.0)),
            fmt_sig(home.decay_decades(3.0)),
            fmt_sig(home.tail_ratio(5.0))
        )?;
        let tag = format!("band[{a}]");
        report.push(kv(&format!("{tag}.center"), home.center));
        report.push(kv(&format!("{tag}.variance"), home.variance()));
        report.push(kv(&format!("{tag}.tail_slope"), home.tail_slope(2.0, 6.0)));
        report.push(kv(&format!("{tag}.decades_within_3d"), home.decay_decades(3.0)));
        report.push(kv(&format!("{tag}.tail_ratio_5d"), home.tail_ratio(5.0)));
        report.push(kv(&format!("{tag}.imaginary_residual"), home.imaginary_residual()));
        all.extend(set);
    }
    summary.flush()?;
    let mut ortho = 0.0f64;
    for x in &all {
        for y in &all {
            let want = if x.band == y.band && x.site == y.site { 1.0 } else { 0.0 };
            ortho = ortho.max((x.overlap(y)? - Complex64::new(want, 0.0)).norm());
        }
    }
    report.push(kv("orthonormality_deviation", ortho));
    report.push(kv("shift_residual", shift_residual));
    report.push(flag("orthonormality", ortho < 1e-6));
    report.push(flag("shift_property", shift_residual < 1e-6));
    Ok(report)
}

pub fn matrix_elements(cfg: &RunConfig, out: &Path) -> Report {
    let phi = cfg.f64_list("phi")?[0];
    let ratio = cfg.f64("v2")? / cfg.f64("v1")?;
    let depths = cfg.f64_list("v1_list")?;
    let max_offset = cfg.usize("max_offset")? as i64;
    let settings = WannierSettings {
        n_kappas: cfg.usize("n_kappas")?,
        basis: basis(cfg)?,
        points_per_period: cfg.usize("grid_per_period")?,
    };
    let tables = depths
        .par_iter()
        .map(|&v1| {
            let p = LatticeParams::new(v1, v1 * ratio, phi)?;
            linear_potential_table_with(&p, max_offset, &settings)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut w = create(out, "matrix_elements.csv", cfg, &["elements per unit F, relative to F x_n".to_string()])?;
    writeln!(w, "{MATRIX_TABLE_HEADER}")?;
    for t in &tables {
        t.write_rows(&mut w)?;
    }
    w.flush()?;
    let mut report = Vec::new();
    let mut local = 0.0f64;
    let mut herm = 0.0f64;
    for (v1, t) in depths.iter().zip(&tables) {
        for a in [1, 2] {
            local = local.max(t.get(a, a, 0).map(|z| z.norm()).unwrap_or(0.0));
        }
        herm = herm.max(t.hermiticity_residual());
        for s in 0..=max_offset {
            report.push(kv(&format!("V1={v1}.|V(2,1,{s})|"), t.get(2, 1, s).map(|z| z.norm()).unwrap_or(0.0)));
        }
        for a in [1, 2] {
            if let Some(x) = t.centers.get(&a) {
                report.push(kv(&format!("V1={v1}.x_center[{a}]"), *x));
            }
        }
    }
    report.push(kv("local_diagonal_max", local));
    report.push(kv("hermiticity_residual", herm));
    let increasing = depths.windows(2).all(|w| w[0] < w[1]);
    if increasing && max_offset >= 1 {
        let mut decreasing = true;
        for s in 1..=max_offset.min(2) {
            let mags: Vec<f64> = tables.iter().map(|t| t.get(2, 1, s).unwrap().norm()).collect();
            decreasing &= mags.windows(2).all(|w| w[1] < w[0]);
        }
        report.push(flag("nonlocal_decreasing_in_depth", decreasing));
    }
    report.push(flag("local_vanishes", local < 1e-8));
    report.push(flag("hermitian", herm < 1e-8));
    Ok(report)
}

fn klein_scenario(cfg: &RunConfig) -> Result<KleinScenario, Failure> {
    Ok(KleinScenario {
        f: cfg.f64("f")?,
        v0: cfg.f64("v0")?,
        w0: cfg.f64("w0")?,
        sigma: cfg.f64("sigma")?,
        kappa0: cfg.f64("kappa0")?,
        band: cfg.usize("band")?,
        x0: cfg.f64("x0")?,
        t_final: cfg.f64("t_final")?,
        dt: cfg.f64("dt")?,
        stride: cfg.usize("stride")?,
        n_periods: cfg.usize("n_periods")?,
        points_per_period: cfg.usize("grid_per_period")?,
        basis: basis(cfg)?,
        n_kappas: cfg.usize("n_kappas")?,
        fit_window: cfg.f64("window")?,
    })
}

pub fn klein(cfg: &RunConfig, out: &Path) -> Report {
    let scenario = klein_scenario(cfg)?;
    let phis = cfg.f64_list("phi")?;
    let params = phis.iter().map(|&p| lattice(cfg, p)).collect::<Result<Vec<_>, _>>()?;
    let runs = params
        .par_iter()
        .map(|p| run_klein_scenario(p, &scenario))
        .collect::<Result<Vec<KleinRun>, _>>()?;
    let mut summary = create(out, "klein_summary.csv", cfg, &[])?;
    writeln!(
        summary,
        "phi,mc2,c,x_cut,purity,schrodinger_transmitted,dirac_transmitted,schrodinger_norm_drift,dirac_norm_drift,max_dirac_speed,late_schrodinger_speed,center_rms"
    )?;
    let mut report = Vec::new();
    for (i, run) in runs.iter().enumerate() {
        let m = &run.metrics;
        let dir = out.join(format!("phi_{i:02}"));
        let extra = vec![
            format!("phi={}", fmt_sig(run.lattice.phi())),
            format!("mc2={}", fmt_sig(run.dirac.mass_energy)),
            format!("c={}", fmt_sig(run.dirac.speed)),
            format!("x_cut={}", fmt_sig(run.x_cut)),
            "density=mean of sum |psi|^2 over each lattice period".to_string(),
            "dirac_initial=gaussian envelope times exp(i kappa0 x) times branch spinor at kappa0".to_string(),
        ];
        let header: Vec<String> = cfg.header().into_iter().chain(extra).collect();
        write_trajectory(&dir, "schrodinger", &run.schrodinger, &header)?;
        write_trajectory(&dir, "dirac", &run.dirac_run, &header)?;
        writeln!(
            summary,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            fmt_sig(run.lattice.phi()),
            fmt_sig(run.dirac.mass_energy),
            fmt_sig(run.dirac.speed),
            fmt_sig(run.x_cut),
            fmt_sig(m.purity),
            fmt_sig(m.schrodinger_transmitted),
            fmt_sig(m.dirac_transmitted),
            fmt_sig(m.schrodinger_norm_drift),
            fmt_sig(m.dirac_norm_drift),
            fmt_sig(m.max_dirac_speed),
            fmt_sig(m.late_schrodinger_speed),
            fmt_sig(m.center_rms)
        )?;
        let tag = format!("phi[{i}]");
        report.push(kv(&format!("{tag}.phi"), run.lattice.phi()));
        report.push(kv(&format!("{tag}.schrodinger_transmitted"), m.schrodinger_transmitted));
        report.push(kv(&format!("{tag}.dirac_transmitted"), m.dirac_transmitted));
        report.push(kv(&format!("{tag}.norm_drift"), m.schrodinger_norm_drift.max(m.dirac_norm_drift)));
        report.push(kv(&format!("{tag}.max_dirac_speed_over_c"), m.max_dirac_speed / run.dirac.speed));
        report.push(kv(&format!("{tag}.late_schrodinger_speed_over_c"), m.late_schrodinger_speed / run.dirac.speed));
        report.push(kv(&format!("{tag}.center_rms_periods"), m.center_rms / PI));
        report.push(kv(&format!("{tag}.purity"), m.purity));
    }
    summary.flush()?;
    Ok(report)
}

pub fn slater_check(cfg: &RunConfig, out: &Path) -> Report {
    let b = basis(cfg)?;
    let n_sites = cfg.usize("n_sites")?;
    let p = lattice(cfg, cfg.f64_list("phi")?[0])?;
    let pair = lattice(cfg, cfg.f64("pair_phi")?)?;
    let band = cfg.usize("band")?;
    let sigmas = cfg.f64_list("sigmas")?;
    let mut rows: Vec<(String, f64, f64, f64)> = Vec::new();
    let mut report = Vec::new();
    for &sigma in &sigmas {
        let env = [Envelope::gaussian(sigma, 0.0, 0.0)];
        let id = slater_oracle(&BandOperator::Identity, &env, &p, &b, n_sites)?;
        rows.push(("identity".into(), p.phi(), sigma, id.discrepancy));
        let e = slater_oracle(&BandOperator::BandEnergy { band }, &env, &p, &b, n_sites)?;
        rows.push((format!("band_energy_{band}"), p.phi(), sigma, e.discrepancy));
        let two = [
            Envelope::gaussian(sigma, 0.0, 0.0),
            Envelope { amplitude: Complex64::new(0.0, 0.5), ..Envelope::gaussian(sigma, 5.0, 0.0) },
        ];
        let d = slater_oracle(&BandOperator::RotatedPair, &two, &pair, &b, n_sites)?;
        rows.push(("rotated_pair".into(), pair.phi(), sigma, d.discrepancy));
    }
    let mut w = create(out, "slater.csv", cfg, &[])?;
    writeln!(w, "operator,phi,sigma,discrepancy")?;
    for (op, phi, sigma, d) in &rows {
        writeln!(w, "{op},{},{},{}", fmt_sig(*phi), fmt_sig(*sigma), fmt_sig(*d))?;
        report.push(kv(&format!("{op}.sigma={sigma}"), *d));
    }
    w.flush()?;
    let series = |name: &str| -> Vec<f64> { rows.iter().filter(|r| r.0 == name).map(|r| r.3).collect() };
    let energy = series(&format!("band_energy_{band}"));
    if sigmas.windows(2).all(|w| w[0] < w[1]) {
        report.push(flag("band_energy_decreasing_in_sigma", energy.windows(2).all(|w| w[1] < w[0])));
    }
    report.push(flag("identity_exact", series("identity").iter().all(|&d| d < 1e-12)));
    Ok(report)
}
