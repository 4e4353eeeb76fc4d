use std::fmt::Write as _;
use std::sync::Arc;

use phaselab::config::{default_window, build_window, DatumConfig, GridConfig, PotentialConfig, SolveConfig, SymbolConfig};
use phaselab::gabor::{calibrate_a, decay_exponent_fit, field_norm, FresnelStft, NormRequest, WindowKind, XLattice};
use phaselab::io::{write_field, write_slice_csv};
use phaselab::potentials::{amalgam_w_p1_estimate, sphere_ft_asymptotic_check, MembershipOptions};
use phaselab::propagator::{decay_envelope, dispersive_decay_scan, DecayScanOptions, MultiplierPropagator};
use phaselab::regression::fit_loglog;
use phaselab::solver::{fourier_l1, global_solve, low_regularity_solve, picard_solve, Mode, SolutionTrajectory};
use phaselab::symbols::{cone_separation_ratio, ConeSampling, HomogeneousSymbol, SmoothedSymbol};
use phaselab::{forward_fourier, lp_norm, Error, SampledField};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::json;

use crate::bundle::{Bundle, CliError, Loaded};

pub fn dispatch(name: &str, loaded: &Loaded) -> Result<Bundle, CliError> {
    match name {
        "fresnel-portrait" => fresnel_portrait(loaded.typed()?),
        "norms" => norms(loaded.typed()?, loaded),
        "decay-scan" => decay_scan(loaded.typed()?),
        "cone-check" => cone_check(loaded.typed()?, loaded.seed),
        "potential-ft" => potential_ft(loaded.typed()?, loaded),
        "solve" => solve(loaded.typed()?, loaded),
        "propagate" => propagate(loaded.typed()?, loaded),
        other => Err(CliError::Config(format!("unknown subcommand {other}"))),
    }
}

/// A Lebesgue exponent; JSON has no infinity, so `"inf"` stands for it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponent(pub f64);

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            s.serialize_f64(self.0)
        } else {
            s.serialize_str("inf")
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Self(v)),
            Raw::Text(s) if matches!(s.as_str(), "inf" | "infinity" | "∞") => Ok(Self(f64::INFINITY)),
            Raw::Text(s) => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got {s:?}"))),
        }
    }
}

fn one() -> f64 {
    1.0
}
fn quarter() -> f64 {
    0.25
}
fn unit_exponent() -> Exponent {
    Exponent(1.0)
}

fn csv_bytes(header: &str, rows: impl IntoIterator<Item = String>) -> Vec<u8> {
    let mut s = String::from(header);
    s.push('\n');
    for r in rows {
        s.push_str(&r);
        s.push('\n');
    }
    s.into_bytes()
}

fn field_bytes(field: &SampledField) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    write_field(&mut buf, field)?;
    Ok(buf)
}

/// Slice through the grid center along the first axis.
fn center_slice(field: &SampledField) -> Result<Vec<u8>, CliError> {
    let anchor = vec![field.grid().points_per_axis() / 2; field.grid().dim()];
    let mut buf = Vec::new();
    write_slice_csv(&mut buf, field, 0, &anchor)?;
    Ok(buf)
}

fn rel_change(a: f64, b: f64) -> f64 {
    (b - a).abs() / a.abs()
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortraitConfig {
    pub symbol: SymbolConfig,
    #[serde(default = "one")]
    pub t: f64,
    #[serde(default = "bump")]
    pub window: WindowKind,
    /// Side of the `x` cube; the drift compares it with twice the side.
    #[serde(default = "sixteen")]
    pub extent: f64,
    #[serde(default = "quarter")]
    pub x_step: f64,
    #[serde(default)]
    pub xi_step: Option<f64>,
    /// Cutoff radius of the smoothing near the origin; automatic when absent.
    #[serde(default)]
    pub smoothing_radius: Option<f64>,
    /// Constant `A` of the near region; calibrated when absent.
    #[serde(default)]
    pub region_constant: Option<f64>,
    /// `|x|` range of the slice growth fit; `[2, 0.45 extent]` when absent.
    #[serde(default)]
    pub slice_range: Option<[f64; 2]>,
}

fn bump() -> WindowKind {
    WindowKind::Bump { radius: 1.0 }
}
fn sixteen() -> f64 {
    16.0
}

fn fresnel_portrait(cfg: PortraitConfig) -> Result<Bundle, CliError> {
    let base = cfg.symbol.build()?;
    let d = base.dim();
    let m = base.degree();
    let mu = match cfg.smoothing_radius {
        Some(r) => SmoothedSymbol::new(base, r)?,
        None => SmoothedSymbol::auto(base),
    };
    let window = build_window(d, cfg.window)?;
    let mut stft = FresnelStft::new(&mu, cfg.t, &window);
    if let Some(s) = cfg.xi_step {
        stft = stft.with_xi_step(s);
    }
    let request = || NormRequest { modulation: vec![(1.0, f64::INFINITY)], amalgam: vec![(1.0, f64::INFINITY)] };
    let lattice = XLattice::cube(d, cfg.extent, cfg.x_step)?;
    let wide = XLattice::cube(d, 2.0 * cfg.extent, cfg.x_step)?;
    let portrait = stft.portrait(&lattice)?;
    let rep = stft.norms(&lattice, request())?;
    let rep2 = stft.norms(&wide, request())?;

    let mut out = Bundle::new(&cfg)?;
    let a = cfg.region_constant.unwrap_or_else(|| calibrate_a(&mu));
    let decay = match decay_exponent_fit(&portrait, &mu, a) {
        Ok(fit) => Some(fit),
        Err(Error::Diagnostic(msg)) => {
            out.warnings.push(format!("no off-graph decay fit: {msg}"));
            None
        }
        Err(e) => return Err(e.into()),
    };
    let [lo, hi] = cfg.slice_range.unwrap_or([2.0, 0.45 * cfg.extent]);
    let (xs, vs): (Vec<f64>, Vec<f64>) = rep.slices[0]
        .1
        .iter()
        .map(|(x, v)| (x[..d].iter().map(|c| c * c).sum::<f64>().sqrt(), *v))
        .filter(|(r, _)| *r >= lo && *r <= hi)
        .unzip();
    let slice_fit = match fit_loglog(&xs, &vs) {
        Ok(fit) => Some(fit),
        Err(e) => {
            out.warnings.push(format!("no slice growth fit: {e}"));
            None
        }
    };
    let (mn, mn2) = (rep.modulation[0].1, rep2.modulation[0].1);
    let (wn, wn2) = (rep.amalgam[0].1, rep2.amalgam[0].1);
    let report = json!({
        "dim": d,
        "degree": m,
        "t": cfg.t,
        "modulation_norm": mn,
        "modulation_norm_doubled": mn2,
        "modulation_drift": rel_change(mn, mn2),
        "amalgam_norm": wn,
        "amalgam_norm_doubled": wn2,
        "amalgam_drift": rel_change(wn, wn2),
        "region_constant": a,
        "decay_slope": decay.map(|f| f.slope),
        "decay_fit_points": decay.map(|f| f.npoints),
        "w_slice_exponent": slice_fit.map(|f| f.slope),
        "w_slice_range": [lo, hi],
    });
    let mut csv = Vec::new();
    portrait.write_csv(&mut csv)?;
    out.add("portrait.csv", csv);
    out.add(
        "slices.csv",
        csv_bytes("x,y,z,slice_norm", rep.slices[0].1.iter().map(|(x, v)| format!("{:e},{:e},{:e},{v:e}", x[0], x[1], x[2]))),
    );
    out.add_json("report.json", &report)?;
    Ok(out)
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormsConfig {
    pub grid: GridConfig,
    pub f: DatumConfig,
    #[serde(default = "default_window")]
    pub window: WindowKind,
    /// Spacing of the window centers.
    #[serde(default = "quarter")]
    pub x_step: f64,
    /// `(p, q)` pairs of `M^{p,q}`.
    #[serde(default)]
    pub modulation: Vec<[Exponent; 2]>,
    /// `(p, q)` pairs of `W^{p,q}`.
    #[serde(default)]
    pub amalgam: Vec<[Exponent; 2]>,
}

fn norms(cfg: NormsConfig, loaded: &Loaded) -> Result<Bundle, CliError> {
    let grid = cfg.grid.build()?;
    let f = cfg.f.build(&grid, loaded.seed, &loaded.base)?;
    let window = build_window(grid.dim(), cfg.window)?;
    let stride = ((cfg.x_step / grid.spacing()).round() as usize).max(1);
    let mut out = Bundle::new(&cfg)?;
    attach_datum_input(&mut out, &cfg.f, loaded);
    let mut rows = Vec::new();
    for (space, pairs, amalgam) in [("M", &cfg.modulation, false), ("W", &cfg.amalgam, true)] {
        for [p, q] in pairs {
            let v = field_norm(&f, &window, stride, p.0, q.0, amalgam)?;
            rows.push((space, *p, *q, v));
        }
    }
    let spectrum = forward_fourier(&f)?;
    out.add("norms.csv", csv_bytes("space,p,q,value", rows.iter().map(|(s, p, q, v)| format!("{s},{},{},{v:e}", show(p.0), show(q.0)))));
    out.add_json(
        "norms.json",
        &json!({
            "l2": lp_norm(&f, 2.0)?,
            "fourier_l1": fourier_l1(&grid, spectrum.values()),
            "norms": rows.iter().map(|(s, p, q, v)| json!({"space": s, "p": p, "q": q, "value": v})).collect::<Vec<_>>(),
        }),
    )?;
    Ok(out)
}

fn show(p: f64) -> String {
    if p.is_finite() {
        format!("{p}")
    } else {
        "inf".into()
    }
}

fn attach_datum_input(out: &mut Bundle, datum: &DatumConfig, loaded: &Loaded) {
    if let DatumConfig::File { path } = datum {
        let full = loaded.base.join(path);
        if let Ok(bytes) = std::fs::read(&full) {
            out.extra_inputs.push((full.display().to_string(), bytes));
        }
    }
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayScanConfig {
    pub symbol: SymbolConfig,
    pub t_list: Vec<f64>,
    #[serde(default = "default_window")]
    pub window: WindowKind,
    /// Inner exponent `p` of `W^{p,∞}`.
    #[serde(default = "unit_exponent")]
    pub inner: Exponent,
    #[serde(default = "quarter")]
    pub y_step: f64,
    #[serde(default)]
    pub max_points: Option<[usize; 3]>,
    #[serde(default = "yes")]
    pub factor_separable: bool,
    #[serde(default = "one")]
    pub domain_scale: f64,
    /// Time range of the slope fit; all times when absent.
    #[serde(default)]
    pub fit_range: Option<[f64; 2]>,
}

fn yes() -> bool {
    true
}

fn decay_scan(cfg: DecayScanConfig) -> Result<Bundle, CliError> {
    let mu = cfg.symbol.build()?;
    let (d, m) = (mu.dim(), mu.degree());
    let mut opts = DecayScanOptions::new(d)?;
    opts.window = build_window(d, cfg.window)?;
    opts.inner = cfg.inner.0;
    opts.y_step = cfg.y_step;
    opts.factor_separable = cfg.factor_separable;
    opts.domain_scale = cfg.domain_scale;
    if let Some(mp) = cfg.max_points {
        opts.max_points = mp;
    }
    let scan = dispersive_decay_scan(&mu, &cfg.t_list, &opts)?;

    let mut out = Bundle::new(&cfg)?;
    out.add(
        "decay.csv",
        csv_bytes(
            "t,norm,envelope,points_per_axis,extent,band,resolved",
            scan.rows.iter().map(|r| {
                format!("{:e},{:e},{:e},{},{:e},{:e},{}", r.t, r.norm, decay_envelope(d, m, r.t), r.points_per_axis, r.extent, r.band, r.resolved)
            }),
        ),
    );
    let fit = if scan.rows.len() < 2 {
        out.warnings.push("a single time gives norms only; no slope is fitted".into());
        None
    } else {
        let [lo, hi] = cfg.fit_range.unwrap_or_else(|| {
            let ts = scan.rows.iter().map(|r| r.t);
            [ts.clone().fold(f64::INFINITY, f64::min), ts.fold(0.0, f64::max)]
        });
        Some(scan.slope(lo, hi)?)
    };
    if scan.flagged {
        out.warnings.push("some rows hit the grid cap and are not fully resolved".into());
    }
    let df = d as f64;
    out.add_json(
        "slope.json",
        &json!({
            "slope": fit.map(|f| f.slope),
            "intercept": fit.map(|f| f.intercept),
            "points": fit.map(|f| f.npoints),
            "residual": fit.map(|f| f.residual),
            "small_time_bound": -2.0 * df / m,
            "large_time_bound": -df / m,
            "factored": scan.factored,
            "flagged": scan.flagged,
        }),
    )?;
    Ok(out)
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConeConfig {
    pub symbol: SymbolConfig,
    pub axis: Vec<f64>,
    pub half_angle: f64,
    #[serde(default = "default_pairs")]
    pub pairs: usize,
    #[serde(default = "default_radii")]
    pub radius_range: [f64; 2],
    /// Also sample the opposite cone.
    #[serde(default)]
    pub symmetric: bool,
}

fn default_pairs() -> usize {
    4000
}
fn default_radii() -> [f64; 2] {
    [1e-2, 1e2]
}

fn cone_check(cfg: ConeConfig, seed: u64) -> Result<Bundle, CliError> {
    let mu = cfg.symbol.build()?;
    let ratio = |pairs: usize| {
        let mut s = ConeSampling::new(cfg.axis.clone(), cfg.half_angle, pairs);
        s.radius_range = (cfg.radius_range[0], cfg.radius_range[1]);
        s.symmetric = cfg.symmetric;
        s.seed = seed;
        cone_separation_ratio(&mu, &s)
    };
    let (r1, r2) = (ratio(cfg.pairs)?, ratio(2 * cfg.pairs)?);
    let change = if r1 > 0.0 { rel_change(r1, r2) } else { f64::INFINITY };
    let mut out = Bundle::new(&cfg)?;
    out.add_json(
        "cone.json",
        &json!({
            "pairs": cfg.pairs,
            "ratio": r1,
            "ratio_doubled_pairs": r2,
            "relative_change": if change.is_finite() { Some(change) } else { None },
            "stable": r1 > 0.0 && change < 0.1,
        }),
    )?;
    Ok(out)
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialFtConfig {
    pub potential: PotentialConfig,
    /// Values of `|ξ|` along `direction`.
    pub radii: Vec<f64>,
    /// Unit vector by default `e₁`.
    #[serde(default)]
    pub direction: Option<Vec<f64>>,
    /// Radii of the large-`|ξ|` asymptotic check (unit spheres only).
    #[serde(default)]
    pub asymptotic_radii: Option<Vec<f64>>,
    #[serde(default)]
    pub membership: Option<MembershipConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MembershipConfig {
    pub grid: GridConfig,
    pub ps: Vec<Exponent>,
    #[serde(default = "default_window")]
    pub window: WindowKind,
    #[serde(default = "default_reach")]
    pub reach: f64,
    #[serde(default = "half")]
    pub x_step: f64,
}

fn default_reach() -> f64 {
    2.5
}
fn half() -> f64 {
    0.5
}

fn potential_ft(cfg: PotentialFtConfig, loaded: &Loaded) -> Result<Bundle, CliError> {
    let v = cfg.potential.build(&loaded.base)?;
    let d = v.dim();
    let dir = match &cfg.direction {
        Some(u) if u.len() == d => {
            let n = u.iter().map(|c| c * c).sum::<f64>().sqrt();
            if n == 0.0 {
                return Err(Error::Parameter("direction must be nonzero".into()).into());
            }
            u.iter().map(|c| c / n).collect::<Vec<_>>()
        }
        Some(_) => return Err(Error::Structural(format!("direction must have {d} coordinates")).into()),
        None => (0..d).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect(),
    };
    let mut csv = String::from("radius,re,im,abs\n");
    for &r in &cfg.radii {
        let xi: Vec<f64> = dir.iter().map(|c| c * r).collect();
        let z = v.transform_at(&xi)?;
        writeln!(csv, "{r:e},{:e},{:e},{:e}", z.re, z.im, z.norm()).expect("writing to a String");
    }
    let asymptotic = cfg.asymptotic_radii.as_ref().map(|radii| sphere_ft_asymptotic_check(&v, radii)).transpose()?;
    let estimates = match &cfg.membership {
        Some(mc) => {
            let grid = mc.grid.build()?;
            let window = build_window(grid.dim(), mc.window)?;
            let ps: Vec<f64> = mc.ps.iter().map(|p| p.0).collect();
            Some(amalgam_w_p1_estimate(&v, &grid, &window, &ps, &MembershipOptions { reach: mc.reach, x_step: mc.x_step })?)
        }
        None => None,
    };
    let mut out = Bundle::new(&cfg)?;
    if let PotentialConfig { shape: phaselab::config::PotentialShape::Density { path }, .. } = &cfg.potential {
        let full = loaded.base.join(path);
        out.extra_inputs.push((full.display().to_string(), std::fs::read(&full).map_err(Error::from)?));
    }
    out.add("potential_ft.csv", csv.into_bytes());
    out.add_json(
        "thresholds.json",
        &json!({
            "membership_threshold": v.membership_threshold().map(Exponent),
            "membership_estimates": estimates,
            "asymptotics": asymptotic,
        }),
    )?;
    Ok(out)
}

// ---------------------------------------------------------------------------

fn trajectory_json(traj: &SolutionTrajectory) -> serde_json::Value {
    let windows: Vec<_> = traj.windows.iter().map(|w| json!({"times": w.times, "report": w.report})).collect();
    json!({
        "grid": {"dim": traj.grid.dim(), "points": traj.grid.points_per_axis(), "extent": traj.grid.extent()},
        "mode": traj.mode,
        "constants": traj.constants,
        "final_time": traj.final_time(),
        "max_ratio": traj.max_ratio(),
        "continuity_gaps": traj.continuity_gaps,
        "windows": windows,
    })
}

fn solve(cfg: SolveConfig, loaded: &Loaded) -> Result<Bundle, CliError> {
    let sc = cfg.build(loaded.seed, &loaded.base)?;
    let traj = match (cfg.mode, cfg.global) {
        (Mode::LowRegularity { .. }, _) => low_regularity_solve(&sc)?,
        (Mode::Standard, true) => global_solve(&sc)?,
        (Mode::Standard, false) => picard_solve(&sc)?,
    };
    let mut out = Bundle::new(&cfg)?;
    attach_datum_input(&mut out, &cfg.f, loaded);
    out.add_json("trajectory.json", &trajectory_json(&traj))?;
    out.add(
        "diagnostics.csv",
        csv_bytes(
            "window,t_start,step,halvings,iterations,max_ratio,residual,quadrature_estimate,max_norm,free_max_norm",
            traj.windows.iter().enumerate().map(|(k, w)| {
                let r = &w.report;
                let ratio = r.ratios.iter().copied().fold(0.0, f64::max);
                format!(
                    "{k},{:e},{:e},{},{},{ratio:e},{:e},{:e},{:e},{:e}",
                    r.t_start, r.step, r.halvings, r.iterations, r.residual, r.quadrature_estimate, r.max_norm, r.free_max_norm
                )
            }),
        ),
    );
    out.add(
        "samples.csv",
        csv_bytes("t,fourier_l1", traj.samples().into_iter().map(|(t, s)| format!("{t:e},{:e}", fourier_l1(&traj.grid, s)))),
    );
    out.add("u_initial.bin", field_bytes(&sc.datum)?);
    for k in 0..traj.windows.len() {
        let field = traj.field(k, traj.windows[k].spectra.len() - 1)?;
        out.add(format!("u_window{k:04}.bin"), field_bytes(&field)?);
    }
    out.add("final_slice.csv", center_slice(&traj.final_field()?)?);
    Ok(out)
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagateConfig {
    pub grid: GridConfig,
    pub symbol: SymbolConfig,
    pub f: DatumConfig,
    pub times: Vec<f64>,
}

fn propagate(cfg: PropagateConfig, loaded: &Loaded) -> Result<Bundle, CliError> {
    let grid = cfg.grid.build()?;
    let mu: HomogeneousSymbol = cfg.symbol.build()?;
    if cfg.times.is_empty() {
        return Err(Error::Parameter("empty time list".into()).into());
    }
    let f = cfg.f.build(&grid, loaded.seed, &loaded.base)?;
    let prop = MultiplierPropagator::new(Arc::new(mu), grid)?;
    let mut out = Bundle::new(&cfg)?;
    attach_datum_input(&mut out, &cfg.f, loaded);
    let mut summary = Vec::new();
    for (i, &t) in cfg.times.iter().enumerate() {
        let u = prop.apply(t, &f)?;
        let spec = forward_fourier(&u)?;
        let alias = prop.aliasing(t, spec.values());
        summary.push(json!({
            "t": t,
            "l2": lp_norm(&u, 2.0)?,
            "fourier_l1": fourier_l1(&grid, spec.values()),
            "aliasing_fraction": alias.fraction,
        }));
        out.add(format!("u_t{i:03}.bin"), field_bytes(&u)?);
        out.add(format!("slice_t{i:03}.csv"), center_slice(&u)?);
    }
    out.add_json("summary.json", &json!({ "initial_l2": lp_norm(&f, 2.0)?, "times": summary }))?;
    Ok(out)
}
