use rayon::prelude::*;
use serde::Serialize;

use super::config::{AtfBackend, ExperimentConfig, StepSize, SystemSpec};
use super::seeds::{stream, StreamRole};
use crate::diffusion::{
    count_iteration_ops, custom_system, dpmd_iteration, rendered_filter, system1_partition,
    system2_partition, Network, NetworkState,
};
use crate::engine::{cpm_step, cpm_step_counted, stability_bound, ControlFilter, CpmState, OpCount};
use crate::error::{Error, Result};
use crate::metrics::{
    complexity_cpm, complexity_dpmd, evaluate, steady_state, ComplexityProfile, MetricSample, PointSet,
};
use crate::scene::{
    find_bundle, freefield_atf, image_source_atf, oracle_target, perturb_atf, planewave_target,
    read_atf_file, sample_oracle_filter, AtfBundle, AtfMatrix, DesiredField, PerturbationModel,
    SceneGeometry, TargetMode,
};
use crate::C64;

/// Runs are computed in parallel batches of this size and folded in index
/// order, so memory stays bounded and results do not depend on the pool size.
const BATCH: usize = 8;

pub const CENTRALIZED: &str = "centralized";

/// One algorithm on one system.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Series {
    pub algorithm: String,
    pub system: String,
}

impl Series {
    pub fn cpm() -> Self {
        Series {
            algorithm: "cpm".into(),
            system: CENTRALIZED.into(),
        }
    }

    pub fn dpmd(system: &str) -> Self {
        Series {
            algorithm: "dpmd".into(),
            system: system.into(),
        }
    }

    /// `cpm`, or `dpmd-<system>`.
    pub fn name(&self) -> String {
        if self.system == CENTRALIZED {
            self.algorithm.clone()
        } else {
            format!("{}-{}", self.algorithm, self.system)
        }
    }
}

/// Metric history of one series in one run. Samples are taken at
/// iterations `1..=iterations`, before the update of that iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub series: Series,
    pub control: Vec<MetricSample>,
    pub validation: Vec<MetricSample>,
    /// Filter driving the loudspeakers after the last update.
    pub final_filter: ControlFilter,
    /// Per-node estimates after the last update; empty for CPM.
    pub node_estimates: Vec<ControlFilter>,
}

#[derive(Debug)]
pub struct SeriesOutcome {
    pub series: Series,
    pub result: Result<Trajectory>,
}

#[derive(Debug)]
pub struct RunOutput {
    pub run_index: usize,
    pub freq: f64,
    pub step_size: f64,
    pub outcomes: Vec<SeriesOutcome>,
}

impl RunOutput {
    /// The trajectories, or the first failure in series order.
    pub fn into_trajectories(self) -> Result<Vec<Trajectory>> {
        self.outcomes.into_iter().map(|o| o.result).collect()
    }
}

/// Nominal ATFs and static targets at one frequency.
#[derive(Debug, Clone)]
pub struct FrequencySetup {
    pub freq: f64,
    pub freq_index: usize,
    pub control: AtfMatrix,
    pub validation: Option<AtfMatrix>,
    planewave: Option<(DesiredField, Option<DesiredField>)>,
}

/// A validated config with its scene and networks built.
#[derive(Debug, Clone)]
pub struct Experiment {
    config: ExperimentConfig,
    geometry: SceneGeometry,
    validation_geometry: Option<SceneGeometry>,
    systems: Vec<(String, Network)>,
    bundles: Option<Vec<AtfBundle>>,
}

fn build_network(spec: &SystemSpec, cfg: &ExperimentConfig, geom: &SceneGeometry) -> Result<Network> {
    let (top, part) = match spec {
        SystemSpec::System1 => system1_partition(),
        SystemSpec::System2 => system2_partition(),
        SystemSpec::Custom { nodes } => custom_system(nodes, geom.n_mics(), geom.n_speakers())?,
    };
    if part.n_mics() != geom.n_mics() || part.n_speakers() != geom.n_speakers() {
        return Err(Error::Config(format!(
            "`system`: {} covers {} microphones and {} loudspeakers, the scene has {} and {}",
            spec.label(),
            part.n_mics(),
            part.n_speakers(),
            geom.n_mics(),
            geom.n_speakers()
        )));
    }
    Network::with_rule(top, part, cfg.combination_rule)
}

impl Experiment {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let geometry = config.geometry.build()?;
        let validation_geometry = geometry.validation_scene();
        let mut systems = Vec::new();
        let specs = if config.algorithm.runs_dpmd() {
            config.system.systems()
        } else {
            Vec::new()
        };
        for (i, spec) in specs.iter().enumerate() {
            let dup = specs.iter().filter(|s| s.label() == spec.label()).count() > 1;
            let label = if dup {
                format!("{}{i}", spec.label())
            } else {
                spec.label().to_string()
            };
            systems.push((label, build_network(spec, config, &geometry)?));
        }
        let bundles = match (config.atf_backend, &config.atf_file) {
            (AtfBackend::File, Some(path)) => Some(read_atf_file(path)?),
            _ => None,
        };
        Ok(Experiment {
            config: config.clone(),
            geometry,
            validation_geometry,
            systems,
            bundles,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn geometry(&self) -> &SceneGeometry {
        &self.geometry
    }

    pub fn systems(&self) -> &[(String, Network)] {
        &self.systems
    }

    /// Series evaluated by this experiment, CPM first.
    pub fn series(&self) -> Vec<Series> {
        let mut out = Vec::new();
        if self.config.algorithm.runs_cpm() {
            out.push(Series::cpm());
        }
        if self.config.algorithm.runs_dpmd() {
            out.extend(self.systems.iter().map(|(label, _)| Series::dpmd(label)));
        }
        out
    }

    fn nominal(&self, freq: f64) -> Result<(AtfMatrix, Option<AtfMatrix>)> {
        let cfg = &self.config;
        match cfg.atf_backend {
            AtfBackend::Freefield => Ok((
                freefield_atf(&self.geometry, freq)?,
                self.validation_geometry
                    .as_ref()
                    .map(|g| freefield_atf(g, freq))
                    .transpose()?,
            )),
            AtfBackend::ImageSource => {
                let ism = |g: &SceneGeometry| {
                    image_source_atf(g, freq, cfg.t60, cfg.fs, cfg.window_len, cfg.max_order)
                };
                Ok((
                    ism(&self.geometry)?,
                    self.validation_geometry.as_ref().map(ism).transpose()?,
                ))
            }
            AtfBackend::File => {
                let bundles = self.bundles.as_deref().unwrap_or(&[]);
                let path = cfg.atf_file.clone().unwrap_or_default();
                let b = find_bundle(bundles, freq).ok_or_else(|| Error::AtfFile {
                    path: path.clone(),
                    detail: format!("no block at {freq} Hz"),
                })?;
                b.check_against(&self.geometry)?;
                Ok((b.control.clone(), b.validation.clone()))
            }
        }
    }

    pub fn frequency(&self, freq: f64, freq_index: usize) -> Result<FrequencySetup> {
        let cfg = &self.config;
        if 2.0 * freq > cfg.fs {
            return Err(Error::InvalidArgument(format!(
                "{freq} Hz is above the Nyquist frequency {} Hz",
                cfg.fs / 2.0
            )));
        }
        let (control, validation) = self.nominal(freq)?;
        let planewave = match cfg.target_mode {
            TargetMode::Oracle => None,
            TargetMode::Planewave => {
                let pw = |g: &SceneGeometry| {
                    planewave_target(g, freq, cfg.planewave_direction, cfg.planewave_amplitude)
                };
                let val = match (&validation, &self.validation_geometry) {
                    (Some(_), Some(g)) => Some(pw(g)?),
                    _ => None,
                };
                Some((pw(&self.geometry)?, val))
            }
        };
        Ok(FrequencySetup {
            freq,
            freq_index,
            control,
            validation,
            planewave,
        })
    }

    /// One adaptive run of every series on identical ATF and noise draws.
    pub fn run(&self, setup: &FrequencySetup, run_index: usize) -> Result<RunOutput> {
        let cfg = &self.config;
        let fi = setup.freq_index;
        let rng = |role| stream(cfg.seed, run_index, fi, role);
        let mut r_pert = rng(StreamRole::Perturbation);
        let mut r_vpert = rng(StreamRole::ValidationPerturbation);
        let mut r_noise = rng(StreamRole::TargetNoise);
        let mut r_vnoise = rng(StreamRole::ValidationNoise);
        let mut r_oracle = rng(StreamRole::OracleFilter);

        let pert = PerturbationModel::new(cfg.perturbation_variance, cfg.seed)?;
        let n_spk = setup.control.n_cols();
        let g_o = match cfg.target_mode {
            TargetMode::Oracle => Some(sample_oracle_filter(n_spk, &mut r_oracle)?),
            TargetMode::Planewave => None,
        };

        let mut live: Vec<Live<'_>> = Vec::new();
        let mut step_size = f64::NAN;
        for n in 0..=cfg.iterations {
            let h = perturb_atf(&setup.control, &pert, &mut r_pert);
            let hv = setup.validation.as_ref().map(|v| perturb_atf(v, &pert, &mut r_vpert));
            let (d, dv) = match (&g_o, &setup.planewave) {
                (Some(g), _) => (
                    oracle_target(&h, g, cfg.snr_db, &mut r_noise)?,
                    hv.as_ref()
                        .map(|hv| oracle_target(hv, g, cfg.snr_db, &mut r_vnoise))
                        .transpose()?,
                ),
                (None, Some((d, dv))) => (d.clone(), dv.clone()),
                (None, None) => unreachable!("target is either oracle or plane wave"),
            };

            if n == 0 {
                step_size = match cfg.step_size {
                    StepSize::Fixed(mu) => mu,
                    StepSize::Auto => 0.5 * stability_bound(&h)?,
                };
                live = self.start(step_size, n_spk, setup.freq)?;
            }

            for s in live.iter_mut().filter(|s| s.failed.is_none()) {
                if n >= 1 {
                    if let Err(e) = s.record(n, &h, &d, hv.as_ref().zip(dv.as_ref())) {
                        s.failed = Some(e);
                        continue;
                    }
                }
                if n < cfg.iterations {
                    s.step(&h, &d, n);
                }
            }
        }

        let outcomes = live
            .into_iter()
            .map(|s| {
                let series = s.series.clone();
                let result = match s.failed {
                    Some(e) => Err(e),
                    None => Ok(s.finish()),
                };
                SeriesOutcome { series, result }
            })
            .collect();
        Ok(RunOutput {
            run_index,
            freq: setup.freq,
            step_size,
            outcomes,
        })
    }

    fn start(&self, mu: f64, n_spk: usize, freq: f64) -> Result<Vec<Live<'_>>> {
        let mut out = Vec::new();
        if self.config.algorithm.runs_cpm() {
            out.push(Live::new(
                Series::cpm(),
                Engine::Cpm(CpmState::new(ControlFilter::zeros(n_spk, freq), mu)?),
            ));
        }
        if self.config.algorithm.runs_dpmd() {
            for (label, net) in &self.systems {
                let state = NetworkState::uniform(net.n_nodes(), mu, n_spk, freq)?;
                out.push(Live::new(Series::dpmd(label), Engine::Dpmd { net, state }));
            }
        }
        Ok(out)
    }
}

enum Engine<'a> {
    Cpm(CpmState),
    Dpmd { net: &'a Network, state: NetworkState },
}

struct Live<'a> {
    series: Series,
    engine: Engine<'a>,
    control: Vec<MetricSample>,
    validation: Vec<MetricSample>,
    failed: Option<Error>,
}

impl<'a> Live<'a> {
    fn new(series: Series, engine: Engine<'a>) -> Self {
        Live {
            series,
            engine,
            control: Vec::new(),
            validation: Vec::new(),
            failed: None,
        }
    }

    fn filter(&self) -> ControlFilter {
        match &self.engine {
            Engine::Cpm(s) => s.filter.clone(),
            Engine::Dpmd { net, state } => rendered_filter(state, &net.partition),
        }
    }

    fn record(
        &mut self,
        n: usize,
        h: &AtfMatrix,
        d: &DesiredField,
        val: Option<(&AtfMatrix, &DesiredField)>,
    ) -> Result<()> {
        let g = self.filter();
        self.control.push(evaluate(h, d, &g, n, PointSet::Control)?);
        if let Some((hv, dv)) = val {
            self.validation.push(evaluate(hv, dv, &g, n, PointSet::Validation)?);
        }
        Ok(())
    }

    fn step(&mut self, h: &AtfMatrix, d: &DesiredField, n: usize) {
        let name = self.series.name();
        let res = match &mut self.engine {
            Engine::Cpm(s) => cpm_step(s, h, d).map(|next| *s = next),
            Engine::Dpmd { net, state } => dpmd_iteration(state, net, h, d).map(|next| *state = next),
        };
        if let Err(e) = res {
            self.failed = Some(e.in_run(&name, n));
        }
    }

    fn finish(self) -> Trajectory {
        let final_filter = self.filter();
        let node_estimates = match &self.engine {
            Engine::Cpm(_) => Vec::new(),
            Engine::Dpmd { state, .. } => state.estimates().cloned().collect(),
        };
        Trajectory {
            series: self.series,
            control: self.control,
            validation: self.validation,
            final_filter,
            node_estimates,
        }
    }
}

/// One run at one frequency; fails on the first diverged series.
pub fn run_single(
    config: &ExperimentConfig,
    freq: f64,
    freq_index: usize,
    run_index: usize,
) -> Result<Vec<Trajectory>> {
    let exp = Experiment::new(config)?;
    let setup = exp.frequency(freq, freq_index)?;
    exp.run(&setup, run_index)?.into_trajectories()
}

/// Per-iteration mean and population standard deviation across runs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CurveStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearningCurve {
    pub series: Series,
    pub point_set: PointSet,
    /// Iteration of each entry.
    pub iterations: Vec<usize>,
    pub nmse: CurveStats,
    pub ac: CurveStats,
    pub runs_used: usize,
}

/// Steady-state level of one series at one frequency, over control points.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub freq_hz: f64,
    pub series: Series,
    pub nmse_ss_db: f64,
    pub ac_ss_db: f64,
    pub runs_used: usize,
    /// Why the bin has no value.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityRow {
    pub series: Series,
    pub node: Option<usize>,
    pub profile: ComplexityProfile,
    /// Operations actually performed by one update, excluding transforms.
    pub counted: OpCount,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceRecord {
    pub freq_hz: f64,
    pub run_index: usize,
    pub series: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepSizeRecord {
    pub freq_hz: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub seed_rule: String,
    pub identical_realizations: bool,
    pub monte_carlo_runs: usize,
    pub iterations: usize,
    pub steady_state_window: usize,
    pub step_sizes: Vec<StepSizeRecord>,
    pub excluded_runs: Vec<DivergenceRecord>,
    pub failed_bins: Vec<DivergenceRecord>,
}

impl Provenance {
    pub fn new(config: &ExperimentConfig) -> Self {
        Provenance {
            config_hash: config.hash(),
            seed: config.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed_rule: "ChaCha20 keyed by SHA-256(\"diffpm/stream/v1\" | seed | run | frequency index | role), integers little-endian u64, role u8".into(),
            identical_realizations: true,
            monte_carlo_runs: config.monte_carlo_runs,
            iterations: config.iterations,
            steady_state_window: steady_state_window(config.iterations),
            step_sizes: Vec::new(),
            excluded_runs: Vec::new(),
            failed_bins: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultSet {
    pub learning_curves: Vec<LearningCurve>,
    pub sweep: Vec<SweepRow>,
    pub complexity: Vec<ComplexityRow>,
    pub provenance: Provenance,
}

/// Final 10% of the iterations, at least one.
pub fn steady_state_window(iterations: usize) -> usize {
    (iterations / 10).max(1)
}

/// Welford accumulator, fed in run-index order.
#[derive(Debug, Clone)]
struct Accum {
    n: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Accum {
    fn new(len: usize) -> Self {
        Accum {
            n: 0,
            mean: vec![0.0; len],
            m2: vec![0.0; len],
        }
    }

    fn push(&mut self, values: impl Iterator<Item = f64>) {
        self.n += 1;
        let n = self.n as f64;
        for ((m, s), x) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(values) {
            let delta = x - *m;
            *m += delta / n;
            *s += delta * (x - *m);
        }
    }

    fn finish(&self) -> CurveStats {
        let n = self.n as f64;
        CurveStats {
            mean: self.mean.clone(),
            std: self.m2.iter().map(|s| (s / n).max(0.0).sqrt()).collect(),
        }
    }
}

struct SeriesAccum {
    series: Series,
    control: (Accum, Accum),
    validation: Option<(Accum, Accum)>,
}

/// Monte Carlo aggregate of every series at one frequency.
#[derive(Debug, Clone)]
pub struct FrequencyResult {
    pub curves: Vec<LearningCurve>,
    pub rows: Vec<SweepRow>,
    pub step_sizes: StepSizeRecord,
    pub excluded: Vec<DivergenceRecord>,
}

pub fn monte_carlo_at(exp: &Experiment, freq: f64, freq_index: usize) -> Result<FrequencyResult> {
    let cfg = exp.config();
    let setup = exp.frequency(freq, freq_index)?;
    let iters = cfg.iterations;
    let has_val = setup.validation.is_some();
    let mut accs: Vec<SeriesAccum> = exp
        .series()
        .into_iter()
        .map(|series| SeriesAccum {
            series,
            control: (Accum::new(iters), Accum::new(iters)),
            validation: has_val.then(|| (Accum::new(iters), Accum::new(iters))),
        })
        .collect();
    let mut excluded = Vec::new();
    let (mut mu_min, mut mu_max) = (f64::INFINITY, f64::NEG_INFINITY);

    let runs: Vec<usize> = (0..cfg.monte_carlo_runs).collect();
    for batch in runs.chunks(BATCH) {
        let outputs: Vec<Result<RunOutput>> = batch.par_iter().map(|&r| exp.run(&setup, r)).collect();
        for out in outputs {
            let out = out?;
            mu_min = mu_min.min(out.step_size);
            mu_max = mu_max.max(out.step_size);
            for (acc, outcome) in accs.iter_mut().zip(out.outcomes) {
                match outcome.result {
                    Ok(t) => {
                        acc.control.0.push(t.control.iter().map(|s| s.nmse_db));
                        acc.control.1.push(t.control.iter().map(|s| s.ac_db));
                        if let Some((a, b)) = acc.validation.as_mut() {
                            a.push(t.validation.iter().map(|s| s.nmse_db));
                            b.push(t.validation.iter().map(|s| s.ac_db));
                        }
                    }
                    Err(e) if cfg.allow_divergence && matches!(e, Error::Divergence { .. }) => {
                        excluded.push(DivergenceRecord {
                            freq_hz: freq,
                            run_index: out.run_index,
                            series: outcome.series.name(),
                            message: e.to_string(),
                        });
                    }
                    Err(e) => return Err(e),
                }
            }
        }
    }

    let window = steady_state_window(iters);
    let iterations: Vec<usize> = (1..=iters).collect();
    let mut curves = Vec::new();
    let mut rows = Vec::new();
    for acc in &accs {
        let used = acc.control.0.n;
        if used == 0 {
            rows.push(SweepRow {
                freq_hz: freq,
                series: acc.series.clone(),
                nmse_ss_db: f64::NAN,
                ac_ss_db: f64::NAN,
                runs_used: 0,
                failure: Some("every run diverged".into()),
            });
            continue;
        }
        let mut sets = vec![(PointSet::Control, &acc.control)];
        if let Some(v) = &acc.validation {
            sets.push((PointSet::Validation, v));
        }
        for (point_set, (nm, ac)) in sets {
            curves.push(LearningCurve {
                series: acc.series.clone(),
                point_set,
                iterations: iterations.clone(),
                nmse: nm.finish(),
                ac: ac.finish(),
                runs_used: used,
            });
        }
        let c = &curves[curves.len() - if acc.validation.is_some() { 2 } else { 1 }];
        rows.push(SweepRow {
            freq_hz: freq,
            series: acc.series.clone(),
            nmse_ss_db: steady_state(&c.nmse.mean, window)?.mean_db,
            ac_ss_db: steady_state(&c.ac.mean, window)?.mean_db,
            runs_used: used,
            failure: None,
        });
    }
    Ok(FrequencyResult {
        curves,
        rows,
        step_sizes: StepSizeRecord {
            freq_hz: freq,
            min: mu_min,
            max: mu_max,
        },
        excluded,
    })
}

/// Monte Carlo runs at `run_frequency_hz`.
pub fn run_monte_carlo(config: &ExperimentConfig) -> Result<ResultSet> {
    let exp = Experiment::new(config)?;
    let fr = monte_carlo_at(&exp, config.run_frequency_hz, config.run_frequency_index())?;
    let mut provenance = Provenance::new(config);
    provenance.step_sizes.push(fr.step_sizes);
    provenance.excluded_runs = fr.excluded;
    Ok(ResultSet {
        learning_curves: fr.curves,
        sweep: fr.rows,
        complexity: complexity_report(&exp)?,
        provenance,
    })
}

/// Steady-state levels over every configured frequency. A failing bin is
/// recorded and the sweep moves on.
pub fn frequency_sweep(config: &ExperimentConfig) -> Result<ResultSet> {
    let exp = Experiment::new(config)?;
    let mut provenance = Provenance::new(config);
    let mut sweep = Vec::new();
    for (i, &f) in config.frequencies.iter().enumerate() {
        match monte_carlo_at(&exp, f, i) {
            Ok(fr) => {
                sweep.extend(fr.rows);
                provenance.step_sizes.push(fr.step_sizes);
                provenance.excluded_runs.extend(fr.excluded);
            }
            Err(e) => {
                for series in exp.series() {
                    provenance.failed_bins.push(DivergenceRecord {
                        freq_hz: f,
                        run_index: 0,
                        series: series.name(),
                        message: e.to_string(),
                    });
                    sweep.push(SweepRow {
                        freq_hz: f,
                        series,
                        nmse_ss_db: f64::NAN,
                        ac_ss_db: f64::NAN,
                        runs_used: 0,
                        failure: Some(e.to_string()),
                    });
                }
            }
        }
    }
    Ok(ResultSet {
        learning_curves: Vec::new(),
        sweep,
        complexity: complexity_report(&exp)?,
        provenance,
    })
}

fn unit_problem(m: usize, n_bright: usize, l: usize) -> Result<(AtfMatrix, DesiredField)> {
    let one = C64::new(1.0, 0.0);
    let h = AtfMatrix::new(0.0, n_bright, m, l, vec![one; m * l])?;
    let d = DesiredField {
        freq: 0.0,
        values: vec![one; m],
        n_bright,
        mode: TargetMode::Oracle,
    };
    Ok((h, d))
}

/// Analytic per-iteration cost of CPM and of every node of every configured
/// system, next to the operations the updates actually perform.
pub fn complexity_report(exp: &Experiment) -> Result<Vec<ComplexityRow>> {
    let geom = exp.geometry();
    let (m, l, f) = (geom.n_mics(), geom.n_speakers(), exp.config().window_len);
    let (h, d) = unit_problem(m, geom.n_bright(), l)?;
    let mut rows = Vec::new();

    let mut counted = OpCount::default();
    let state = CpmState::new(ControlFilter::zeros(l, 0.0), 1e-3)?;
    cpm_step_counted(&state, &h, &d, &mut counted)?;
    rows.push(ComplexityRow {
        series: Series::cpm(),
        node: None,
        profile: complexity_cpm(m, l, f)?,
        counted,
    });

    for (label, net) in exp.systems() {
        let counts = count_iteration_ops(net, &h, &d)?;
        for (k, counted) in counts.into_iter().enumerate() {
            let m_k = net.partition.mics(k).len();
            let l_k = net.partition.speakers(k).len();
            let n_k = net.topology.neighborhood(k).len();
            rows.push(ComplexityRow {
                series: Series::dpmd(label),
                node: Some(k),
                profile: complexity_dpmd(m_k, l_k, m_k, n_k, l, f)?,
                counted,
            });
        }
    }
    Ok(rows)
}
