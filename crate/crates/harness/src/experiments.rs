use std::fmt::Write as _;
use std::path::Path;

use nfbeam::codebooks::{assemble_codebook, codeword_correlation, sample_axis, CodebookSpecs, SamplingSpec};
use nfbeam::hybrid::{build_dictionary, effective_weights, omp_hybrid};
use nfbeam::propagation::{ChannelVector, Propagator, RecordPolicy};
use nfbeam::scenario::{ScenarioConfig, SPEED_OF_LIGHT};
use nfbeam::training::{
    blockage_ratio, exhaustive_search, mrt_power, received_power, run_scheme, spectral_efficiency, Scheme,
    TrainingRecord, TrainingResult,
};
use nfbeam::waveforms::{make_beam, mrt_beam, BeamKind, BeamParams};
use nfbeam::{Scenario, Weights};
use rayon::prelude::*;

use crate::channels::{sha256_hex, ChannelCache};
use crate::config::{
    with_head_counts, BeamPatternSweep, BlockageSweep, CodebookSizeSweep, CorrelationSweep, Experiment,
    ExperimentConfig, FrequencySweep, HeatmapScale, HybridGapSweep, ObstacleSizeSweep, PowerMapSweep, SeVsPowerSweep,
};
use crate::error::{Context, HarnessError, Result};
use crate::heatmap::{export_heatmap, Axes};
use crate::output::{RunManifest, RunOutput};
use crate::stats::{gap_db, mean_std_err};
use crate::users::{draw_users, lattice, RNG_ALGORITHM};

/// `sha256:<hex>` of the canonical config JSON.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    format!("sha256:{}", sha256_hex(&serde_json::to_vec(cfg).expect("config serializes")))
}

/// Runs `cfg`, writing CSVs, heatmaps and `manifest.json` into `out_dir`.
/// On failure every file written so far is removed.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunManifest> {
    cfg.validate()?;
    let mut out = RunOutput::create(out_dir)?;
    let cache = match &cfg.channel_cache_dir {
        Some(d) => ChannelCache::on_disk(d),
        None => ChannelCache::in_memory(),
    };
    let run = Run { cfg, cache };
    match &cfg.experiment {
        Experiment::BeamPattern(s) => run.beam_pattern(s, &mut out)?,
        Experiment::PowerMap(s) => run.power_map(s, &mut out)?,
        Experiment::SeVsPower(s) => run.se_vs_power(s, &mut out)?,
        Experiment::BlockageSweep(s) => run.blockage_sweep(s, &mut out)?,
        Experiment::FrequencySweep(s) => run.frequency_sweep(s, &mut out)?,
        Experiment::CodebookSizeSweep(s) => run.codebook_size_sweep(s, &mut out)?,
        Experiment::ObstacleSizeSweep(s) => run.obstacle_size_sweep(s, &mut out)?,
        Experiment::HybridGap(s) => run.hybrid_gap(s, &mut out)?,
        Experiment::CorrelationCurves(s) => run.correlation_curves(s, &mut out)?,
    }
    out.finish(config_hash(cfg), cfg.kind().as_str(), cfg.rng_seed, RNG_ALGORITHM, cfg.quick)
}

/// Per-user results, aligned with the scheme list.
#[derive(Debug, Clone)]
pub struct UserOutcome {
    pub user: (f64, f64),
    pub blockage_ratio: f64,
    pub mrt_power: f64,
    pub results: Vec<TrainingResult>,
}

/// Runs every scheme for every channel, parallel over users.
pub fn evaluate_users(
    scenario: &Scenario,
    specs: &CodebookSpecs,
    schemes: &[Scheme],
    channels: &[ChannelVector],
) -> Result<Vec<UserOutcome>> {
    channels
        .par_iter()
        .map(|h| {
            let at = || format!("user ({}, {})", h.user.0, h.user.1);
            let results = schemes
                .iter()
                .map(|&s| run_scheme(s, h, scenario, specs).context(|| format!("{s} at {}", at())))
                .collect::<Result<Vec<_>>>()?;
            Ok(UserOutcome {
                user: h.user,
                blockage_ratio: blockage_ratio(scenario, h.user).context(at)?,
                mrt_power: mrt_power(h, scenario).context(at)?,
                results,
            })
        })
        .collect()
}

struct Run<'a> {
    cfg: &'a ExperimentConfig,
    cache: ChannelCache,
}

fn line(buf: &mut String, args: std::fmt::Arguments<'_>) {
    buf.write_fmt(args).expect("string write");
    buf.push('\n');
}

macro_rules! row {
    ($buf:expr, $($arg:tt)*) => { line(&mut $buf, format_args!($($arg)*)) };
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Column statistics for one scheme over a set of users.
struct SchemeStats {
    users: usize,
    mean_power: f64,
    mean_se: f64,
    mean_gap_db: f64,
    std_err_gap_db: f64,
}

fn scheme_stats<'o>(outcomes: impl Iterator<Item = &'o UserOutcome>, k: usize) -> Option<SchemeStats> {
    let (mut p, mut se, mut gaps) = (Vec::new(), Vec::new(), Vec::new());
    for o in outcomes {
        let r = &o.results[k];
        p.push(r.received_power);
        se.push(r.spectral_efficiency);
        gaps.push(gap_db(o.mrt_power, r.received_power));
    }
    if p.is_empty() {
        return None;
    }
    let (mean_gap_db, std_err_gap_db) = mean_std_err(&gaps);
    Some(SchemeStats {
        users: p.len(),
        mean_power: mean_std_err(&p).0,
        mean_se: mean_std_err(&se).0,
        mean_gap_db,
        std_err_gap_db,
    })
}

const STATS_HEADER: &str = "users,mean_received_power,mean_se_bps_per_hz,mean_gap_to_mrt_db,std_err_gap_db";

fn stats_cols(s: Option<SchemeStats>) -> String {
    match s {
        Some(s) => format!("{},{},{},{},{}", s.users, s.mean_power, s.mean_se, s.mean_gap_db, s.std_err_gap_db),
        None => "0,,,,".into(),
    }
}

fn records_csv(buf: &mut String, scenario_id: &str, schemes: &[Scheme], outcomes: &[UserOutcome]) {
    for o in outcomes {
        for (&s, r) in schemes.iter().zip(&o.results) {
            row!(*buf, "{}", TrainingRecord::new(s, scenario_id, o.user, o.blockage_ratio, r).to_csv_row());
        }
    }
}

impl Run<'_> {
    fn scenario(&self, cfg: &ScenarioConfig) -> Result<Scenario> {
        cfg.validate().context(|| "scenario".into())
    }

    fn users_and_outcomes(&self, scenario: &Scenario, specs: &CodebookSpecs) -> Result<Vec<UserOutcome>> {
        let c = self.cfg;
        let users = draw_users(scenario, &c.user_region, c.num_users, c.rng_seed)?;
        let channels = self.cache.get(scenario, &users)?;
        evaluate_users(scenario, specs, &c.schemes, &channels)
    }

    fn single_channel(&self, scenario: &Scenario, user: [f64; 2]) -> Result<ChannelVector> {
        let mut ch = self.cache.get(scenario, &[(user[0], user[1])])?;
        Ok(ch.remove(0))
    }

    fn blockage_sweep(&self, sweep: &BlockageSweep, out: &mut RunOutput) -> Result<()> {
        let s = self.scenario(&self.cfg.scenario)?;
        let outcomes = self.users_and_outcomes(&s, &self.cfg.codebooks)?;
        let mut users = format!("{}\n", TrainingRecord::CSV_HEADER);
        records_csv(&mut users, "blockage-sweep", &self.cfg.schemes, &outcomes);
        out.write("users.csv", users)?;

        let e = &sweep.bin_edges;
        let mut bins = vec![(0.0, 0.0)];
        bins.extend(e.windows(2).map(|w| (w[0], w[1])));
        let last = e[e.len() - 1];
        let mut csv = format!("scheme,ratio_lo,ratio_hi,{STATS_HEADER}\n");
        for (k, scheme) in self.cfg.schemes.iter().enumerate() {
            for (b, &(lo, hi)) in bins.iter().enumerate() {
                let inside = |r: f64| match b {
                    0 => r == 0.0,
                    _ => r >= lo && (r < hi || (hi == last && r <= hi)),
                };
                let st = scheme_stats(outcomes.iter().filter(|o| inside(o.blockage_ratio)), k);
                row!(csv, "{scheme},{lo},{hi},{}", stats_cols(st));
            }
        }
        out.write("blockage_sweep.csv", csv)
    }

    fn se_vs_power(&self, sweep: &SeVsPowerSweep, out: &mut RunOutput) -> Result<()> {
        // Codeword selection does not depend on P, so powers scale linearly.
        let s = self.scenario(&self.cfg.scenario)?;
        let outcomes = self.users_and_outcomes(&s, &self.cfg.codebooks)?;
        let mut users = format!("{}\n", TrainingRecord::CSV_HEADER);
        records_csv(&mut users, "se-vs-power", &self.cfg.schemes, &outcomes);
        out.write("users.csv", users)?;

        let mut csv = String::from("scheme,transmit_power,mean_received_power,mean_se_bps_per_hz,std_err_se_bps_per_hz\n");
        for (k, scheme) in self.cfg.schemes.iter().enumerate() {
            for &p in &sweep.powers {
                let scale = p / s.power();
                let powers: Vec<f64> = outcomes.iter().map(|o| o.results[k].received_power * scale).collect();
                let se = powers
                    .iter()
                    .map(|&x| spectral_efficiency(x, s.noise_power()))
                    .collect::<nfbeam::Result<Vec<_>>>()
                    .context(|| "spectral efficiency".into())?;
                let (mse, ese) = mean_std_err(&se);
                row!(csv, "{scheme},{p},{},{mse},{ese}", mean_std_err(&powers).0);
            }
        }
        out.write("se_vs_power.csv", csv)
    }

    fn frequency_sweep(&self, sweep: &FrequencySweep, out: &mut RunOutput) -> Result<()> {
        let base = &self.cfg.scenario;
        let lambda0 = SPEED_OF_LIGHT / base.frequency_hz;
        let aperture = (base.num_elements - 1) as f64 * base.spacing_over_lambda * lambda0;
        let mut users = format!("{}\n", TrainingRecord::CSV_HEADER);
        let mut csv = format!("frequency_hz,num_elements,scheme,{STATS_HEADER}\n");
        for &f in &sweep.frequencies_hz {
            let d = base.spacing_over_lambda * SPEED_OF_LIGHT / f;
            let mut sc = base.clone();
            sc.frequency_hz = f;
            sc.num_elements = (aperture / d).round() as usize + 1;
            sc.grid.dx = None;
            sc.grid.dy = None;
            let s = self.scenario(&sc)?;
            let outcomes = self.users_and_outcomes(&s, &self.cfg.codebooks)?;
            records_csv(&mut users, &format!("f{}GHz", f / 1e9), &self.cfg.schemes, &outcomes);
            for (k, scheme) in self.cfg.schemes.iter().enumerate() {
                row!(csv, "{f},{},{scheme},{}", sc.num_elements, stats_cols(scheme_stats(outcomes.iter(), k)));
            }
        }
        out.write("users.csv", users)?;
        out.write("frequency_sweep.csv", csv)
    }

    fn codebook_size_sweep(&self, sweep: &CodebookSizeSweep, out: &mut RunOutput) -> Result<()> {
        let c = self.cfg;
        let s = self.scenario(&c.scenario)?;
        let users = draw_users(&s, &c.user_region, c.num_users, c.rng_seed)?;
        let channels = self.cache.get(&s, &users)?;
        let shrink = |n: usize| if c.quick { n.div_ceil(4) } else { n };
        let mut csv = format!("angle_count,distance_count,scheme,probes,{STATS_HEADER}\n");
        for &na in &sweep.angle_counts {
            for &nd in &sweep.distance_counts {
                let (na, nd) = (shrink(na), shrink(nd));
                let specs = with_head_counts(&c.codebooks, na, nd)?;
                let outcomes = evaluate_users(&s, &specs, &c.schemes, &channels)?;
                for (k, scheme) in c.schemes.iter().enumerate() {
                    let probes = outcomes[0].results[k].probes_used;
                    row!(csv, "{na},{nd},{scheme},{probes},{}", stats_cols(scheme_stats(outcomes.iter(), k)));
                }
            }
        }
        out.write("codebook_size_sweep.csv", csv)
    }

    fn obstacle_size_sweep(&self, sweep: &ObstacleSizeSweep, out: &mut RunOutput) -> Result<()> {
        let mut csv = format!("obstacle_length_m,mean_blockage_ratio,scheme,{STATS_HEADER}\n");
        let mut users = format!("{}\n", TrainingRecord::CSV_HEADER);
        for &len in &sweep.lengths {
            let mut sc = self.cfg.scenario.clone();
            sc.obstacles = vec![[sweep.x_left, sweep.x_right, sweep.y_center - len / 2.0, sweep.y_center + len / 2.0]];
            let s = self.scenario(&sc)?;
            let outcomes = self.users_and_outcomes(&s, &self.cfg.codebooks)?;
            records_csv(&mut users, &format!("len{len}m"), &self.cfg.schemes, &outcomes);
            let ratios: Vec<f64> = outcomes.iter().map(|o| o.blockage_ratio).collect();
            let mean_ratio = mean_std_err(&ratios).0;
            for (k, scheme) in self.cfg.schemes.iter().enumerate() {
                row!(csv, "{len},{mean_ratio},{scheme},{}", stats_cols(scheme_stats(outcomes.iter(), k)));
            }
        }
        out.write("users.csv", users)?;
        out.write("obstacle_size_sweep.csv", csv)
    }

    fn power_map(&self, sweep: &PowerMapSweep, out: &mut RunOutput) -> Result<()> {
        let c = self.cfg;
        let s = self.scenario(&c.scenario)?;
        let pts = lattice(&s, &c.user_region, sweep.nx, sweep.ny)?;
        let open: Vec<(f64, f64)> = pts.iter().filter(|p| !p.1).map(|p| p.0).collect();
        let channels = self.cache.get(&s, &open)?;
        let schemes = [sweep.reference, sweep.candidate];
        let outcomes = evaluate_users(&s, &c.codebooks, &schemes, &channels)?;

        let mut csv = format!(
            "x_m,y_m,inside_obstacle,blockage_ratio,{}_power,{}_power,gain_db\n",
            sweep.reference, sweep.candidate
        );
        let mut gain = vec![vec![0.0; sweep.nx]; sweep.ny];
        let mut it = outcomes.iter();
        for (idx, &(p, blocked)) in pts.iter().enumerate() {
            let (i, j) = (idx / sweep.ny, idx % sweep.ny);
            if blocked {
                row!(csv, "{},{},1,,,,", p.0, p.1);
                continue;
            }
            let o = it.next().expect("one outcome per open point");
            let (r, q) = (o.results[0].received_power, o.results[1].received_power);
            let g = gap_db(q, r);
            gain[j][i] = g;
            row!(csv, "{},{},0,{},{r},{q},{g}", p.0, p.1, o.blockage_ratio);
        }
        out.write("power_map.csv", csv)?;
        let xs: Vec<f64> = (0..sweep.nx).map(|i| pts[i * sweep.ny].0 .0).collect();
        let ys: Vec<f64> = (0..sweep.ny).map(|j| pts[j].0 .1).collect();
        let png = out.claim("power_map_gain_db.png")?;
        out.claim("power_map_gain_db.csv")?;
        let axes = Axes { rows: &ys, row_name: "y_m", cols: &xs, col_name: "x_m" };
        export_heatmap(&gain, &png, HeatmapScale::Linear, "gain_db", Some(axes))?;
        Ok(())
    }

    fn beam_pattern(&self, sweep: &BeamPatternSweep, out: &mut RunOutput) -> Result<()> {
        let s = self.scenario(&self.cfg.scenario)?;
        let h = self.single_channel(&s, sweep.user)?;
        let mrt = mrt_power(&h, &s).context(|| "mrt".into())?;
        let mut beams: Vec<(&str, Option<BeamParams>, Weights)> = Vec::new();
        for kind in [BeamKind::Focused, BeamKind::Curved, BeamKind::NfAiry] {
            let book = assemble_codebook(kind, &self.cfg.codebooks.for_kind(kind)).context(|| format!("{kind} codebook"))?;
            let r = exhaustive_search(&h, &book, &s).context(|| format!("{kind} search"))?;
            let w = make_beam(&s, &r.best_params).context(|| format!("{kind} beam"))?;
            beams.push((kind.as_str(), Some(r.best_params), w));
        }
        beams.push(("mrt", None, mrt_beam(&h, s.power()).context(|| "mrt beam".into())?));

        let mut csv = String::from("beam,theta_rad,r_m,curvature,scale_m,decay,received_power,gap_to_mrt_db\n");
        let prop = Propagator::new(&s);
        for (name, params, w) in &beams {
            let p = received_power(&h, w).context(|| name.to_string())?;
            let (mut th, mut r, mut cv, mut sc, mut a) = (None, None, None, None, None);
            match params {
                Some(BeamParams::Focused { theta, r: rr }) => (th, r) = (Some(*theta), Some(*rr)),
                Some(BeamParams::Curved { theta, r: rr, c }) => (th, r, cv) = (Some(*theta), Some(*rr), Some(*c)),
                Some(BeamParams::NfAiry { theta, r: rr, s, a: aa }) => {
                    (th, r, sc, a) = (Some(*theta), Some(*rr), Some(*s), Some(*aa))
                }
                _ => {}
            }
            row!(csv, "{name},{},{},{},{},{},{p},{}", opt(th), opt(r), opt(cv), opt(sc), opt(a), gap_db(mrt, p));

            let grid = prop
                .propagate(w.coeffs(), &RecordPolicy::Every(sweep.plane_stride))
                .context(|| format!("propagating {name}"))?;
            let (xs, ys, rows) = grid.magnitude_map();
            let ys: Vec<f64> = ys.into_iter().step_by(sweep.y_stride).collect();
            let rows: Vec<Vec<f64>> = rows.into_iter().step_by(sweep.y_stride).collect();
            let png = out.claim(&format!("beam_{name}.png"))?;
            out.claim(&format!("beam_{name}.csv"))?;
            let axes = Axes { rows: &ys, row_name: "y_m", cols: &xs, col_name: "x_m" };
            export_heatmap(&rows, &png, sweep.scale, "field_abs", Some(axes))?;
        }
        out.write("beam_pattern.csv", csv)
    }

    fn hybrid_gap(&self, sweep: &HybridGapSweep, out: &mut RunOutput) -> Result<()> {
        let s = self.scenario(&self.cfg.scenario)?;
        let h = self.single_channel(&s, sweep.user)?;
        let book = assemble_codebook(BeamKind::NfAiry, &self.cfg.codebooks.for_kind(BeamKind::NfAiry))
            .context(|| "nf-airy codebook".into())?;
        let best = exhaustive_search(&h, &book, &s).context(|| "nf-airy search".into())?;
        let ideal = make_beam(&s, &best.best_params).context(|| "ideal beam".into())?;
        let p_dig = received_power(&h, &ideal).context(|| "digital power".into())?;
        let dict = build_dictionary(s.num_elements(), sweep.oversampling).context(|| "dictionary".into())?;

        let hybrid = |n_rf: usize, bits: u32| {
            let f = omp_hybrid(&ideal, n_rf, &dict, bits).context(|| format!("omp with {n_rf} chains, {bits} bits"))?;
            let w = effective_weights(&f).context(|| "effective weights".into())?;
            let p = received_power(&h, &w).context(|| "hybrid power".into())?;
            Ok::<_, HarnessError>((f, w, p))
        };
        let mut csv = String::from("n_rf,bits,oversampling,digital_power,hybrid_power,gap_db,rank_deficient\n");
        for &bits in &sweep.bits {
            for &n_rf in &sweep.n_rf {
                let (f, _, p) = hybrid(n_rf, bits)?;
                row!(csv, "{n_rf},{bits},{},{p_dig},{p},{},{}", sweep.oversampling, gap_db(p_dig, p), f.rank_deficient as u8);
            }
        }
        out.write("hybrid_gap.csv", csv)?;

        let (f, w, _) = hybrid(sweep.response_n_rf, sweep.response_bits)?;
        let mut resp = String::from(
            "element,y_m,channel_abs,channel_phase_rad,digital_abs,digital_phase_rad,hybrid_abs,hybrid_phase_rad\n",
        );
        for n in 0..s.num_elements() {
            let (c, d, y) = (h.h[n], ideal.coeffs()[n], w.coeffs()[n]);
            row!(
                resp,
                "{n},{},{},{},{},{},{},{}",
                s.geometry().position(n),
                c.norm(),
                c.arg(),
                d.norm(),
                d.arg(),
                y.norm(),
                y.arg()
            );
        }
        out.write("hybrid_response.csv", resp)?;
        let mut text = Vec::new();
        f.write_text(&mut text).context(|| "hybrid factorization".into())?;
        out.write("hybrid_factorization.txt", text)
    }

    fn correlation_curves(&self, sweep: &CorrelationSweep, out: &mut RunOutput) -> Result<()> {
        let s = self.scenario(&self.cfg.scenario)?;
        let beam = |sc: f64, a: f64| {
            make_beam(&s, &BeamParams::NfAiry { theta: sweep.theta, r: sweep.r, s: sc, a }).context(|| "codeword".into())
        };
        let n = sweep.count;
        let axes: [(&str, &str, SamplingSpec); 3] = [
            ("decay", "uniform", SamplingSpec::Decay { min: sweep.a_min, max: sweep.a_max, count: n }),
            (
                "scale_m",
                "reciprocal-uniform",
                SamplingSpec::Scale { s_min: sweep.s_min, s_max: sweep.s_max, count: n, symmetric: false },
            ),
            (
                "scale_m",
                "uniform",
                SamplingSpec::ScaleLinear { s_min: sweep.s_min, s_max: sweep.s_max, count: n, symmetric: false },
            ),
        ];
        let mut csv = String::from("axis,sampling,index,parameter_value,correlation_to_first,correlation_to_previous\n");
        for (axis, sampling, spec) in axes {
            let values = sample_axis(&spec).context(|| format!("{axis} axis"))?;
            let words = values
                .iter()
                .map(|&v| if axis == "decay" { beam(sweep.s, v) } else { beam(v, sweep.a) })
                .collect::<Result<Vec<_>>>()?;
            for (i, (v, w)) in values.iter().zip(&words).enumerate() {
                let first = codeword_correlation(&words[0], w).context(|| "correlation".into())?;
                let prev = match i {
                    0 => None,
                    _ => Some(codeword_correlation(&words[i - 1], w).context(|| "correlation".into())?),
                };
                row!(csv, "{axis},{sampling},{i},{v},{first},{}", opt(prev));
            }
        }
        out.write("correlation_curves.csv", csv)
    }
}
