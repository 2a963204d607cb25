//! The experiments behind each subcommand.

use anyhow::{anyhow, Context, Result};
use nalgebra::{DMatrix, DVector};
use serde_json::json;
use toral_lab::cones::{domination_survey, CuDisk};
use toral_lab::holonomy::{
    angle_holder_fit, distortion_ratio, grid_params, holonomy_measure_ratio, linear_holonomy_jacobian, sample_stable_pairs,
    stable_holonomy, DistortionOptions, HolonomyOptions,
};
use toral_lab::hyperbolicity::{
    c0_estimate, cs_terminals, hyperbolicity_survey, itinerary_tails, lyapunov_spectrum, occupation_rate_bound, occupation_survey,
    random_start, tail_decay_fit,
};
use toral_lab::linalg;
use toral_lab::manifolds::{contraction_verify, density_check, dynamical_flatness, grow_unstable_manifold, local_stable_manifold, transform_series, GrowOptions};
use toral_lab::measures::{ergodicity_dispersion, srb_uniqueness_distance, stability_scan, MeasureOptions, ObservableSet};
use toral_lab::stats;
use toral_lab::torus::{map_hash, verify_map_conditions, DeformedMap, Dynamics, Inverse, TorusPoint, VerifyOptions};

use crate::config::{Config, ConfigError};
use crate::report::{csv_text, num, Check, Outcome, Summary};

/// The subcommands, in the order they are documented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::Subcommand)]
pub enum Command {
    /// Cone invariance, norm bounds, volume preservation and domination.
    MapVerify,
    /// Lyapunov spectrum of one long orbit.
    Lyapunov,
    /// Time spent outside the deformation region and itinerary tails.
    Occupation,
    /// Terminal cs- and cu-Birkhoff averages of random orbits.
    Birkhoff,
    /// Graph-transform contraction, stable patch and its forward contraction.
    Manifold,
    /// Stable manifold of a fixed point against transverse disks.
    Density,
    /// Area of iterated cu-disks inside unit cubes of the lift.
    Flatness,
    /// Push-forwards of two cu-disks and their distance.
    Srb,
    /// Dispersion of Birkhoff averages over random starts.
    Ergodicity,
    /// Stable holonomy between two cu-disks and its measure ratio.
    Holonomy,
    /// Jacobian distortion along same-leaf pairs.
    Distortion,
    /// Conditions and ergodicity across a range of strengths.
    Scan,
}

impl Command {
    pub const ALL: [Command; 12] = [
        Command::MapVerify,
        Command::Lyapunov,
        Command::Occupation,
        Command::Birkhoff,
        Command::Manifold,
        Command::Density,
        Command::Flatness,
        Command::Srb,
        Command::Ergodicity,
        Command::Holonomy,
        Command::Distortion,
        Command::Scan,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::MapVerify => "map-verify",
            Command::Lyapunov => "lyapunov",
            Command::Occupation => "occupation",
            Command::Birkhoff => "birkhoff",
            Command::Manifold => "manifold",
            Command::Density => "density",
            Command::Flatness => "flatness",
            Command::Srb => "srb",
            Command::Ergodicity => "ergodicity",
            Command::Holonomy => "holonomy",
            Command::Distortion => "distortion",
            Command::Scan => "scan",
        }
    }

    /// Name of the configuration table holding this command's parameters.
    pub fn section(self) -> &'static str {
        match self {
            Command::MapVerify => "map_verify",
            other => other.name(),
        }
    }

    pub fn claim(self) -> &'static str {
        match self {
            Command::MapVerify => {
                "cone fields are invariant, cone planes contract by sigma outside V and lose at most a factor 1 + delta0 inside V, and the invariant splitting is dominated"
            }
            Command::Lyapunov => "Lyapunov exponents of a typical orbit; for the undeformed map they are the logarithms of the eigenvalue moduli",
            Command::Occupation => "typical orbits spend a definite fraction of time outside V, and orbits that do not are exponentially rare",
            Command::Birkhoff => {
                "Birkhoff averages of log||Df|E^cs|| and log||(Df|E^cu)^-1|| are eventually below -c0 < 0, with c0 controlled by the occupation fraction"
            }
            Command::Manifold => "graph transforms contract slopes and expand domains, and local stable manifolds contract at a rate below lambda_bar < 1",
            Command::Density => "the stable manifold of a fixed point meets every transverse disk of radius epsilon0",
            Command::Flatness => "iterates of a cu-disk meet unit cubes of the lift in uniformly bounded area",
            Command::Srb => {
                "push-forwards of Lebesgue measure on distinct cu-disks converge to one measure, on which cs-Birkhoff averages are negative"
            }
            Command::Ergodicity => "Birkhoff averages of observables do not depend on the starting point",
            Command::Holonomy => "stable holonomy between cu-disks changes measure by a bounded factor",
            Command::Distortion => "Jacobians along the cu bundle stay comparable along same-leaf orbit pairs",
            Command::Scan => "the conditions and ergodicity persist across the verified strength range",
        }
    }
}

struct Run<'a> {
    command: Command,
    config: &'a Config,
    map: DeformedMap,
    hash: String,
    seed: u64,
    checks: Vec<Check>,
    tables: Vec<(String, String)>,
    log: Vec<String>,
}

impl Run<'_> {
    fn note(&mut self, line: impl Into<String>) {
        self.log.push(line.into());
    }

    fn table(&mut self, suffix: &str, text: String) {
        let name = if suffix.is_empty() { format!("{}.csv", self.command.name()) } else { format!("{}_{suffix}.csv", self.command.name()) };
        self.tables.push((name, text));
    }

    fn finish(mut self, metrics: serde_json::Value) -> Outcome {
        let pass = self.checks.iter().all(|c| c.pass);
        for c in &self.checks {
            self.log.push(format!("{} {} = {:e} {} {:e}", if c.pass { "pass" } else { "FAIL" }, c.name, c.value, c.relation, c.bound));
        }
        self.log.push(format!("result: {}", if pass { "pass" } else { "threshold failure" }));
        Outcome {
            summary: Summary {
                command: self.command.name().to_string(),
                claim: self.command.claim().to_string(),
                pass,
                map_hash: self.hash,
                seed: self.seed,
                checks: self.checks,
                metrics,
            },
            tables: self.tables,
            log: self.log,
        }
    }
}

fn point(field: &str, coords: &[f64], dim: usize) -> Result<TorusPoint> {
    if coords.len() != dim {
        return Err(ConfigError::field(field, format!("expected {dim} coordinates, got {}", coords.len())).into());
    }
    TorusPoint::new(coords.to_vec()).map_err(|e| ConfigError::field(field, e.to_string()).into())
}

fn is_undeformed(map: &DeformedMap) -> bool {
    map.sites().iter().all(|s| s.strength == 0.0)
}

fn site_balls(map: &DeformedMap) -> Vec<(TorusPoint, f64)> {
    map.sites().iter().map(|s| (s.center.clone(), s.radius)).collect()
}

/// Runs `command` with `config`; the caller sets up the thread pool.
pub fn run(command: Command, config: &Config) -> Result<Outcome> {
    config.validate(command.name())?;
    let map = config.build_map()?;
    let hash = map_hash(&map);
    let seed = config.seed()?;
    let mut run = Run { command, config, map, hash, seed, checks: Vec::new(), tables: Vec::new(), log: Vec::new() };
    run.note(format!("command {} seed {} map {}", command.name(), seed, run.hash));
    run.note(format!("map: dimension {}, {} sites, strengths {:?}", run.map.dim(), run.map.sites().len(), run.map.sites().iter().map(|s| s.strength).collect::<Vec<_>>()));
    match command {
        Command::MapVerify => map_verify(run),
        Command::Lyapunov => lyapunov(run),
        Command::Occupation => occupation(run),
        Command::Birkhoff => birkhoff(run),
        Command::Manifold => manifold(run),
        Command::Density => density(run),
        Command::Flatness => flatness(run),
        Command::Srb => srb(run),
        Command::Ergodicity => ergodicity(run),
        Command::Holonomy => holonomy(run),
        Command::Distortion => distortion(run),
        Command::Scan => scan(run),
    }
}

fn map_verify(mut run: Run) -> Result<Outcome> {
    let c = run.config.map_verify.clone();
    let opts = VerifyOptions {
        sigma: c.sigma,
        delta0: c.delta0,
        aperture: c.aperture,
        samples: c.samples,
        seed: run.seed,
        planes_per_point: c.planes_per_point,
        det_tolerance: c.det_tolerance,
    };
    let report = verify_map_conditions(&run.map, &opts)?;
    run.note(format!("condition table over {} samples:\n{}", c.samples, report.table().trim_end()));
    for check in &report.checks {
        run.checks.push(Check { name: check.name.clone(), value: check.value, relation: "<=".into(), bound: check.bound, pass: check.pass });
    }
    let survey = domination_survey(&run.map, c.domination_points, c.angle_samples, c.aperture, c.frame_steps, run.seed.wrapping_add(1))?;
    run.checks.push(Check::lt("max_domination_ratio", survey.max_domination, 1.0));
    run.checks.push(Check::le("domination_violations", survey.violations as f64, 0.0));
    run.checks.push(Check::lt("angle_contraction", survey.angle_contraction, 1.0));
    let rows: Vec<Vec<String>> = report
        .checks
        .iter()
        .map(|k| vec![k.name.clone(), num(k.value), num(k.bound), k.pass.to_string()])
        .chain([
            vec!["max_domination_ratio".into(), num(survey.max_domination), num(1.0), (survey.max_domination < 1.0).to_string()],
            vec!["angle_contraction".into(), num(survey.angle_contraction), num(1.0), (survey.angle_contraction < 1.0).to_string()],
        ])
        .collect();
    run.table("", csv_text(&["condition", "value", "bound", "pass"], rows)?);
    let metrics = json!({
        "conditions": report,
        "domination": survey,
    });
    Ok(run.finish(metrics))
}

fn lyapunov(mut run: Run) -> Result<Outcome> {
    let c = run.config.lyapunov.clone();
    let dim = run.map.dim();
    let x0 = match &c.start {
        Some(v) => point("lyapunov.start", v, dim)?,
        None => random_start(dim, run.seed, 0),
    };
    let result = lyapunov_spectrum(&run.map, &x0, c.n)?;
    run.note(format!("exponents after {} steps: {:?}", c.n, result.exponents));
    let oracle = if is_undeformed(&run.map) {
        let mut logs: Vec<f64> = run
            .map
            .base()
            .eigen()
            .components
            .iter()
            .flat_map(|comp| std::iter::repeat(comp.modulus.ln()).take(comp.basis.ncols()))
            .collect();
        logs.sort_by(|a, b| b.total_cmp(a));
        for (i, (e, o)) in result.exponents.iter().zip(&logs).enumerate() {
            run.checks.push(Check::le(&format!("exponent_{i}_oracle_deviation"), (e - o).abs(), c.tolerance));
        }
        Some(logs)
    } else {
        None
    };
    run.checks.push(Check::le("sum_vs_log_det_deviation", (result.sum() - result.log_det_average).abs(), c.tolerance));
    let rows = result.history.iter().map(|cp| {
        let mut row = vec![cp.k.to_string()];
        row.extend(cp.exponents.iter().map(|v| num(*v)));
        row
    });
    let header: Vec<String> = std::iter::once("k".to_string()).chain((0..dim).map(|i| format!("exponent_{i}"))).collect();
    let header: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    run.table("", csv_text(&header, rows)?);
    let metrics = json!({
        "n": c.n,
        "start": x0.as_slice(),
        "exponents": result.exponents,
        "sum": result.sum(),
        "log_det_average": result.log_det_average,
        "oracle": oracle,
    });
    Ok(run.finish(metrics))
}

fn occupation(mut run: Run) -> Result<Outcome> {
    let c = run.config.occupation.clone();
    let occupations = occupation_survey(&run.map, c.starts, c.n, run.seed)?;
    let eps_hat = stats::quantile(&occupations, c.quantile);
    let covered = occupations.iter().filter(|o| **o >= eps_hat).count() as f64 / occupations.len() as f64;
    run.note(format!("occupation quantile {} over {} starts of length {}: {eps_hat}", c.quantile, c.starts, c.n));
    run.checks.push(Check::gt("epsilon_hat", eps_hat, 0.0));
    run.checks.push(Check::ge("fraction_at_least_epsilon_hat", covered, 1.0 - c.quantile));

    let center = match &c.tail_center {
        Some(v) => point("occupation.tail_center", v, run.map.dim())?,
        None => run.map.sites().first().map(|s| s.center.clone()).ok_or_else(|| ConfigError::field("occupation.tail_center", "the map has no sites"))?,
    };
    let (_, cu) = run.map.reference_splitting();
    let disk = CuDisk::new(center, &cu, c.tail_radius)?;
    let tails = itinerary_tails(&run.map, &disk, &c.tail_lengths, c.tail_epsilon, c.tail_samples, run.seed.wrapping_add(1))?;
    let fit = tail_decay_fit(&tails)?;
    run.note(format!("itinerary tail slope {} (se {})", fit.slope, fit.slope_se));
    run.checks.push(Check::lt("tail_slope_upper_bound", fit.slope + c.tail_sigmas * fit.slope_se, 0.0));
    run.table("", csv_text(&["start", "occupation"], occupations.iter().enumerate().map(|(i, o)| vec![i.to_string(), num(*o)]))?);
    run.table(
        "tails",
        csv_text(
            &["n", "epsilon", "samples", "hits", "fraction", "std_error"],
            tails.iter().map(|t| vec![t.n.to_string(), num(t.epsilon), t.samples.to_string(), t.hits.to_string(), num(t.fraction), num(t.std_error)]),
        )?,
    );
    let metrics = json!({
        "starts": c.starts,
        "n": c.n,
        "epsilon_hat": eps_hat,
        "min_occupation": occupations.iter().copied().fold(f64::INFINITY, f64::min),
        "mean_occupation": stats::mean(&occupations),
        "tails": tails,
        "tail_fit": fit,
    });
    Ok(run.finish(metrics))
}

fn birkhoff(mut run: Run) -> Result<Outcome> {
    let c = run.config.birkhoff.clone();
    let summaries = hyperbolicity_survey(&run.map, c.starts, c.n, run.seed)?;
    let c0 = c0_estimate(&summaries, c.quantile);
    let occupations: Vec<f64> = summaries.iter().map(|s| s.occupation).collect();
    let eps_hat = stats::quantile(&occupations, c.quantile);
    let bound = occupation_rate_bound(c.sigma, c.delta0, eps_hat);
    let below = summaries.iter().filter(|s| s.cs_terminal <= -c0 && s.cu_terminal <= -c0).count() as f64 / summaries.len() as f64;
    run.note(format!("c0 {c0}, occupation quantile {eps_hat}, occupation bound {bound}"));
    run.checks.push(Check::gt("c0_hat", c0, 0.0));
    run.checks.push(Check::ge("fraction_below_minus_c0", below, 1.0 - c.quantile));
    run.checks.push(Check::ge("c0_hat_minus_bound", c0 - bound, -c.margin));
    run.table(
        "",
        csv_text(
            &["start", "cs_terminal", "cu_terminal", "occupation"],
            summaries.iter().enumerate().map(|(i, s)| vec![i.to_string(), num(s.cs_terminal), num(s.cu_terminal), num(s.occupation)]),
        )?,
    );
    let cs: Vec<f64> = summaries.iter().map(|s| s.cs_terminal).collect();
    let cu: Vec<f64> = summaries.iter().map(|s| s.cu_terminal).collect();
    let metrics = json!({
        "starts": c.starts,
        "n": c.n,
        "c0_hat": c0,
        "epsilon_hat": eps_hat,
        "occupation_bound": bound,
        "max_cs_terminal": cs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        "max_cu_terminal": cu.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        "mean_cs_terminal": stats::mean(&cs),
        "mean_cu_terminal": stats::mean(&cu),
    });
    Ok(run.finish(metrics))
}

fn manifold(mut run: Run) -> Result<Outcome> {
    let c = run.config.manifold.clone();
    let dim = run.map.dim();
    let x = match &c.point {
        Some(v) => point("manifold.point", v, dim)?,
        None => random_start(dim, run.seed, 0),
    };
    let series = transform_series(&run.map, &x, c.series_radius, c.series_k0, c.series_iterations, c.c, c.resolution)?;
    run.note(format!("graph transform: theta {} gamma {} lambda_bar {}", series.theta, series.gamma, series.lambda_bar));
    run.checks.push(Check::lt("transform_theta", series.theta, 1.0));
    run.checks.push(Check::gt("transform_gamma_minus_lambda_bar", series.gamma - series.lambda_bar, 0.0));

    let sm = local_stable_manifold(&run.map, &x, c.delta1, c.transforms, c.resolution)?;
    let report = contraction_verify(&run.map, &sm.patch, c.contraction_n, c.contraction_samples, c.c, run.seed)?;
    let rate = report.rate.ok_or_else(|| anyhow!("contraction rate needs at least two steps"))?;
    run.note(format!("stable patch settled to {:e}; contraction rate {rate} lambda_bar {}", sm.settle_distance, report.lambda_bar));
    run.checks.push(Check::le("contraction_rate_minus_lambda_bar", rate - report.lambda_bar, 0.0));
    run.checks.push(Check::lt("lambda_bar", report.lambda_bar, 1.0));

    let mut oracle = serde_json::Value::Null;
    if is_undeformed(&run.map) {
        let es = run.map.base().stable_basis();
        let projector = DMatrix::identity(dim, dim) - &es * es.transpose();
        let plane = (0..sm.patch.node_count())
            .filter_map(|i| sm.patch.offset(&sm.patch.node_coords(i)))
            .map(|v| (&projector * v).amax())
            .fold(0.0, f64::max);
        let norm = linalg::restriction(run.map.base().matrix(), &es).norm;
        run.checks.push(Check::le("patch_plane_deviation", plane, c.plane_tolerance));
        run.checks.push(Check::le("rate_vs_stable_norm_deviation", (rate - norm).abs(), c.rate_tolerance));
        oracle = json!({ "stable_norm": norm, "plane_deviation": plane });
    }
    run.table("", csv_text(&["k", "max_ratio"], report.max_ratio.iter().enumerate().map(|(k, r)| vec![k.to_string(), num(*r)]))?);
    run.table(
        "transform",
        csv_text(
            &["iteration", "k_bound", "gamma"],
            series.k_bounds.iter().enumerate().map(|(i, k)| vec![i.to_string(), num(*k), series.gammas.get(i.wrapping_sub(1)).map_or(String::new(), |g| num(*g))]),
        )?,
    );
    let metrics = json!({
        "point": x.as_slice(),
        "transform": { "theta": series.theta, "gamma": series.gamma, "lambda_bar": series.lambda_bar, "k_bounds": series.k_bounds },
        "patch": { "settle_distance": sm.settle_distance, "k_bound": sm.patch.k_bound() },
        "contraction": { "rate": rate, "lambda": report.lambda, "lambda_bar": report.lambda_bar, "samples": report.samples },
        "oracle": oracle,
    });
    Ok(run.finish(metrics))
}

fn density(mut run: Run) -> Result<Outcome> {
    let c = run.config.density.clone();
    let dim = run.map.dim();
    let q = match &c.fixed_point {
        Some(v) => point("density.fixed_point", v, dim)?,
        None => TorusPoint::origin(dim),
    };
    let opts = GrowOptions { resolution: c.resolution, budget: c.budget, ..GrowOptions::default() };
    let sheet = grow_unstable_manifold(&Inverse(&run.map), &q, c.length, &opts)?;
    let (_, cu) = run.map.reference_splitting();
    let report = density_check(&sheet, &cu, c.epsilon0, c.trials, run.seed)?;
    run.note(format!("stable sheet: {} samples, {} steps, max gap {}", sheet.len(), sheet.steps, sheet.max_gap));
    run.checks.push(Check::ge("hit_fraction", report.fraction, c.min_fraction));
    run.checks.push(Check::le("tangent_aperture", sheet.tangent_aperture, opts.aperture));
    let gaps = toral_lab::manifolds::transverse_gaps(&sheet, &cu, c.epsilon0, c.trials, run.seed)?;
    run.table("", csv_text(&["trial", "gap"], gaps.iter().enumerate().map(|(i, g)| vec![i.to_string(), g.map_or(String::new(), num)]))?);
    let metrics = json!({
        "fixed_point": q.as_slice(),
        "sheet_samples": sheet.len(),
        "sheet_max_gap": sheet.max_gap,
        "tangent_aperture": sheet.tangent_aperture,
        "density": report,
    });
    Ok(run.finish(metrics))
}

fn flatness(mut run: Run) -> Result<Outcome> {
    let c = run.config.flatness.clone();
    let dim = run.map.dim();
    let center = match &c.center {
        Some(v) => point("flatness.center", v, dim)?,
        None => TorusPoint::origin(dim),
    };
    let (_, cu) = run.map.reference_splitting();
    let disk = CuDisk::new(center, &cu, c.radius)?;
    let mut reports = Vec::new();
    for &n in &c.lengths {
        let r = dynamical_flatness(&run.map, &disk, n, c.cubes, c.grid, run.seed)?;
        run.note(format!("n {n}: max area {} mean area {}", r.max_area, r.mean_area));
        reports.push(r);
    }
    let first = reports.first().expect("lengths are validated").max_area;
    let largest = reports.iter().map(|r| r.max_area).fold(0.0, f64::max);
    run.checks.push(Check::lt("max_area", largest, f64::MAX));
    run.checks.push(Check::le("max_area_growth", largest / first - 1.0, c.growth_tolerance));
    run.table(
        "",
        csv_text(
            &["n", "cube", "area"],
            reports.iter().flat_map(|r| r.areas.iter().enumerate().map(move |(i, a)| vec![r.n.to_string(), i.to_string(), num(*a)])),
        )?,
    );
    let summary: Vec<_> = reports.iter().map(|r| json!({ "n": r.n, "max_area": r.max_area, "mean_area": r.mean_area })).collect();
    Ok(run.finish(json!({ "radius": c.radius, "cubes": c.cubes, "lengths": summary })))
}

fn srb(mut run: Run) -> Result<Outcome> {
    let c = run.config.srb.clone();
    let dim = run.map.dim();
    let (_, cu) = run.map.reference_splitting();
    let disk_a = CuDisk::new(point("srb.disk_a", &c.disk_a, dim)?, &cu, c.radius)?;
    let disk_b = CuDisk::new(point("srb.disk_b", &c.disk_b, dim)?, &cu, c.radius)?;
    let obs = ObservableSet::standard(&run.map, c.observables);
    let opts = MeasureOptions { grid: c.grid, ..MeasureOptions::default() };
    let report = srb_uniqueness_distance(&run.map, &disk_a, &disk_b, c.n, c.samples, run.seed, c.resamples, &obs, &opts)?;
    run.note(format!(
        "distance {} (marginal tv {}, observables {}), baseline {} +- {}",
        report.distance, report.marginal_tv, report.integral_difference, report.baseline_mean, report.baseline_sd
    ));
    run.checks.push(Check::le("distance", report.distance, report.threshold));

    let cloud = &report.a.final_cloud;
    let terminals = cs_terminals(&run.map, cloud, c.cloud_n)?;
    let negative = terminals.iter().filter(|t| **t < 0.0).count() as f64 / terminals.len().max(1) as f64;
    run.note(format!("{} cloud points, fraction with negative cs average {negative}", cloud.len()));
    run.checks.push(Check::ge("cloud_negative_cs_fraction", negative, c.cloud_fraction));

    let header: Vec<String> = (0..dim).map(|i| format!("x{i}")).chain(std::iter::once("cs_terminal".to_string())).collect();
    let header: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    run.table(
        "",
        csv_text(
            &header,
            cloud.iter().zip(&terminals).map(|(p, t)| p.as_slice().iter().chain(std::iter::once(t)).map(|v| num(*v)).collect::<Vec<_>>()),
        )?,
    );
    run.table("baseline", csv_text(&["resample", "distance"], report.baseline.iter().enumerate().map(|(i, d)| vec![i.to_string(), num(*d)]))?);
    let metrics = json!({
        "n": c.n,
        "samples": c.samples,
        "distance": report.distance,
        "marginal_tv": report.marginal_tv,
        "integral_difference": report.integral_difference,
        "baseline_mean": report.baseline_mean,
        "baseline_sd": report.baseline_sd,
        "threshold": report.threshold,
        "observables": report.a.observable_names,
        "integrals_a": report.a.integrals,
        "integrals_b": report.b.integrals,
        "tv_to_uniform_a": report.a.tv_to_uniform(),
        "cloud_n": c.cloud_n,
        "cloud_negative_cs_fraction": negative,
        "cloud_max_cs_terminal": terminals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    });
    Ok(run.finish(metrics))
}

fn ergodicity(mut run: Run) -> Result<Outcome> {
    let c = run.config.ergodicity.clone();
    let obs = ObservableSet::standard(&run.map, c.observables);
    let report = ergodicity_dispersion(&run.map, c.starts, c.n, &obs, run.seed, c.same_start)?;
    run.note(format!("dispersion {} envelope {}", report.dispersion, report.envelope));
    run.checks.push(Check::le("dispersion", report.dispersion, report.envelope));
    run.table(
        "",
        csv_text(
            &["observable", "mean", "std_dev"],
            report.names.iter().zip(&report.means).zip(&report.std_devs).map(|((n, m), s)| vec![n.clone(), num(*m), num(*s)]),
        )?,
    );
    Ok(run.finish(serde_json::to_value(&report)?))
}

fn holonomy(mut run: Run) -> Result<Outcome> {
    let c = run.config.holonomy.clone();
    let dim = run.map.dim();
    let (cs, cu) = run.map.reference_splitting();
    let center = match &c.source_center {
        Some(v) => point("holonomy.source_center", v, dim)?,
        None => run.map.sites().last().map(|s| s.center.clone()).ok_or_else(|| ConfigError::field("holonomy.source_center", "the map has no sites"))?,
    };
    let (s, u) = (cs.ncols(), cu.ncols());
    if c.target_tilt.len() != s || c.target_tilt.iter().any(|r| r.len() != u) {
        return Err(ConfigError::field("holonomy.target_tilt", format!("expected {s} rows of {u} entries")).into());
    }
    if c.target_shift.len() != s {
        return Err(ConfigError::field("holonomy.target_shift", format!("expected {s} entries")).into());
    }
    let tilt = DMatrix::from_fn(s, u, |i, j| c.target_tilt[i][j]);
    let source = CuDisk::new(center.clone(), &cu, c.source_radius)?;
    let target = CuDisk::new(center.translate(&(&cs * DVector::from_column_slice(&c.target_shift))), &(&cu + &cs * tilt), c.target_radius)?;
    let opts = HolonomyOptions { steps: c.steps, reach: c.reach, ..HolonomyOptions::default() };
    let pair = stable_holonomy(&run.map, &source, &grid_params(u, c.source_radius, c.grid), &target, &opts)?;
    run.note(format!("{} of {} grid points matched", pair.matches.len(), pair.params.len()));
    run.checks.push(Check::ge("match_fraction", pair.match_fraction(), c.min_match_fraction));

    let mut reports = Vec::new();
    for &r in &c.radii {
        let rep = holonomy_measure_ratio(&pair, r, c.subdisks, run.seed)?;
        run.note(format!("radius {r}: max ratio {:?} min ratio {:?}, {} sub-disks skipped", rep.max_ratio, rep.min_ratio, rep.skipped.len()));
        reports.push(rep);
    }
    let maxima: Vec<f64> = reports.iter().map(|r| r.max_ratio.unwrap_or(f64::NAN)).collect();
    let worst = maxima.iter().copied().fold(0.0, |a: f64, b| if b.is_nan() { f64::NAN } else { a.max(b) });
    run.checks.push(Check::lt("max_ratio", worst, f64::MAX));
    for (i, w) in maxima.windows(2).enumerate() {
        run.checks.push(Check::lt(&format!("max_ratio_drift_{i}"), (w[1] - w[0]).abs() / w[0], c.max_drift));
    }
    let mut oracle = serde_json::Value::Null;
    if is_undeformed(&run.map) {
        let jac = linear_holonomy_jacobian(&run.map, &source, &target)?;
        let dev = reports
            .iter()
            .flat_map(|r| [r.max_ratio, r.min_ratio])
            .map(|v| v.map_or(f64::NAN, |v| (v - jac).abs()))
            .fold(0.0, |a: f64, b| if b.is_nan() { f64::NAN } else { a.max(b) });
        run.checks.push(Check::le("ratio_vs_projection_determinant", dev, c.oracle_tolerance));
        oracle = json!({ "projection_determinant": jac, "max_deviation": dev });
    }
    let rows = pair.matches.iter().map(|m| {
        let mut row = vec![m.index.to_string()];
        row.extend(pair.params[m.index].iter().map(|v| num(*v)));
        row.extend(m.target_param.iter().map(|v| num(*v)));
        row.push(num(m.stable_distance));
        row.push(num(m.contraction_rate));
        row
    });
    let header: Vec<String> = std::iter::once("index".to_string())
        .chain((0..u).map(|i| format!("source_{i}")))
        .chain((0..u).map(|i| format!("target_{i}")))
        .chain(["stable_distance".to_string(), "contraction_rate".to_string()])
        .collect();
    let header: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    run.table("", csv_text(&header, rows)?);
    run.table(
        "ratios",
        csv_text(
            &["radius", "subdisk", "ratio"],
            reports.iter().flat_map(|r| r.ratios.iter().enumerate().map(move |(i, v)| vec![num(r.radius), i.to_string(), num(*v)])),
        )?,
    );
    let ratios: Vec<_> = reports
        .iter()
        .map(|r| json!({ "radius": r.radius, "max_ratio": r.max_ratio, "min_ratio": r.min_ratio, "subdisks": r.ratios.len(), "skipped": r.skipped.len() }))
        .collect();
    let metrics = json!({
        "grid_points": pair.params.len(),
        "matched": pair.matches.len(),
        "match_fraction": pair.match_fraction(),
        "max_contraction_rate": pair.max_contraction_rate(),
        "ratios": ratios,
        "oracle": oracle,
    });
    Ok(run.finish(metrics))
}

fn distortion(mut run: Run) -> Result<Outcome> {
    let c = run.config.distortion.clone();
    let (_, cu) = run.map.reference_splitting();
    let opts = HolonomyOptions { steps: c.steps, ..HolonomyOptions::default() };
    let pairs = sample_stable_pairs(&run.map, &site_balls(&run.map), c.pairs, c.separation, c.lead, run.seed, &opts)?;
    run.note(format!("{} same-leaf pairs", pairs.len()));
    run.checks.push(Check::ge("pairs", pairs.len() as f64, c.pairs as f64));
    let mut rows = Vec::new();
    let mut slopes = Vec::new();
    for (i, (x, y)) in pairs.iter().enumerate() {
        let rec = distortion_ratio(&run.map, x, y, &cu, &cu, c.n_max, &DistortionOptions::default())?;
        let fit = rec.fit.with_context(|| format!("pair {i}: too few gaps for a slope"))?;
        slopes.push(fit.slope);
        rows.push(vec![i.to_string(), num(rec.initial_distance), num(rec.max_gap), num(fit.slope), num(fit.slope_se)]);
    }
    let min = slopes.iter().copied().fold(f64::INFINITY, f64::min);
    let max = slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    run.checks.push(Check::ge("min_slope", min, -c.slope_bound));
    run.checks.push(Check::le("max_slope", max, c.slope_bound));
    let holder = angle_holder_fit(&run.map, &pairs, c.holder_n, run.seed)?;
    run.note(format!("angle decay theta {} alpha {:?}", holder.theta, holder.alpha));
    run.checks.push(Check::lt("holder_theta", holder.theta, 1.0));
    run.table("", csv_text(&["pair", "initial_distance", "max_gap", "slope", "slope_se"], rows)?);
    let metrics = json!({
        "pairs": pairs.len(),
        "n_max": c.n_max,
        "min_slope": min,
        "max_slope": max,
        "holder": {
            "n": holder.n,
            "pairs_used": holder.pairs_used,
            "theta": holder.theta,
            "lambda_dom": holder.lambda_dom,
            "alpha": holder.alpha,
            "alpha_raw": holder.alpha_raw,
            "constant": holder.constant,
        },
    });
    Ok(run.finish(metrics))
}

fn scan(mut run: Run) -> Result<Outcome> {
    let c = run.config.scan.clone();
    let strengths = c.strengths();
    let verify = VerifyOptions { samples: c.samples, seed: run.seed, ..VerifyOptions::default() };
    let rows = stability_scan(&run.map, &strengths, &verify, c.starts, c.n, c.observables, run.seed)?;
    for row in &rows {
        run.note(format!(
            "strength {}: conditions {}, dispersion {:?}",
            row.strength,
            if row.conditions_pass { "pass" } else { "fail" },
            row.dispersion.as_ref().map(|d| (d.dispersion, d.envelope))
        ));
        run.checks.push(Check::le(&format!("strength_{}_worst_condition_ratio", row.strength), row.worst_check_ratio, 1.0));
        let (value, bound) = row.dispersion.as_ref().map_or((f64::NAN, 0.0), |d| (d.dispersion, d.envelope));
        run.checks.push(Check::le(&format!("strength_{}_dispersion", row.strength), value, bound));
    }
    run.table(
        "",
        csv_text(
            &["strength", "conditions_pass", "worst_check_ratio", "dispersion", "envelope"],
            rows.iter().map(|r| {
                vec![
                    num(r.strength),
                    r.conditions_pass.to_string(),
                    num(r.worst_check_ratio),
                    r.dispersion.as_ref().map_or(String::new(), |d| num(d.dispersion)),
                    r.dispersion.as_ref().map_or(String::new(), |d| num(d.envelope)),
                ]
            }),
        )?,
    );
    Ok(run.finish(json!({ "rows": rows })))
}
